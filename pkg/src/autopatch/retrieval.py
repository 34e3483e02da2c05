"""Embed program representations and retrieve the single closest example.

The index is deliberately a flat file plus exhaustive cosine scan: at a few
thousand entries approximate-NN machinery buys nothing and exact scoring keeps
retrieval trivially testable. Two embedding providers are supported: a remote
HTTP service and a deterministic local fallback that feature-hashes token
trigrams.

Index persistence is two files: `<path>` holds a JSON header line followed by
one JSON metadata line per entry, and `<path>.vec` holds the vectors as
count x dim little-endian float32, in metadata order.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from ._http import http_post_json
from .corpus import CodePair
from .errors import (
    DimMismatch,
    DuplicateId,
    EmptyIndex,
    EmptyInput,
    ProviderUnavailable,
    ZeroVector,
)
from .metrics import tokenize

EMBED_BASE_ENV = "AUTOPATCH_EMBED_BASE"
EMBED_KEY_ENV = "AUTOPATCH_EMBED_KEY"

LOCAL_DIM = 256


class SourceKind(Enum):
    CFG_SERIALIZATION = "cfg_serialization"
    RAW_SOURCE = "raw_source"


def _stable_bucket(gram: tuple[str, ...], dim: int) -> int:
    digest = hashlib.blake2b("\x1f".join(gram).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def hash_grams(text: str) -> list[tuple[str, ...]]:
    """Token trigrams of the text, with fallbacks that guarantee at least one
    gram for any nonempty input (shorter token runs collapse to a single gram,
    token-free text falls back to character trigrams)."""
    tokens = tokenize(text)
    if len(tokens) >= 3:
        return [tuple(tokens[i : i + 3]) for i in range(len(tokens) - 2)]
    if tokens:
        return [tuple(tokens)]
    chars = list(text.strip()) or list(text)
    if len(chars) >= 3:
        return [tuple(chars[i : i + 3]) for i in range(len(chars) - 2)]
    return [tuple(chars)]


class LocalHashingProvider:
    """Deterministic offline embedding: feature-hash token trigrams into a
    fixed number of buckets, then L2-normalize."""

    name = "local"

    def __init__(self, dim: int = LOCAL_DIM):
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        counts = np.zeros(self.dim, dtype=np.float64)
        for gram in hash_grams(text):
            counts[_stable_bucket(gram, self.dim)] += 1.0
        norm = np.linalg.norm(counts)
        return (counts / norm).astype(np.float32)


class RemoteEmbeddingProvider:
    """HTTP embedding service speaking `{"model", "input": [text]}` requests
    and `{"data": [{"embedding": [...]}]}` responses."""

    name = "remote"

    def __init__(self, base_url: str, api_key: str = "", model: str = "", timeout_s: float = 60.0):
        self.base_url = base_url
        self.api_key = api_key
        self.model = model
        self.timeout_s = timeout_s

    @classmethod
    def from_env(cls, model: str = "") -> "RemoteEmbeddingProvider":
        base = os.environ.get(EMBED_BASE_ENV)
        if not base:
            raise ProviderUnavailable(f"{EMBED_BASE_ENV} is not set")
        return cls(base_url=base, api_key=os.environ.get(EMBED_KEY_ENV, ""), model=model)

    def embed(self, text: str) -> np.ndarray:
        payload = {"model": self.model, "input": [text]}
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            response = http_post_json(self.base_url, payload, headers, self.timeout_s)
        except OSError as exc:
            raise ProviderUnavailable(f"embedding service unreachable: {exc}") from exc
        try:
            values = response["data"][0]["embedding"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProviderUnavailable(f"malformed embedding response: {exc}") from None
        return np.asarray(values, dtype=np.float32)


def embed_text(text: str, provider) -> np.ndarray:
    if not text:
        raise EmptyInput("cannot embed empty text")
    vector = provider.embed(text)
    if vector.ndim != 1:
        raise ProviderUnavailable(f"provider returned shape {vector.shape}")
    if not np.linalg.norm(vector) > 0:
        raise ZeroVector("provider returned a zero vector")
    return vector.astype(np.float32)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    if a.shape != b.shape:
        raise DimMismatch(f"{a.shape} vs {b.shape}")
    a64 = a.astype(np.float64)
    b64 = b.astype(np.float64)
    norm_a = np.linalg.norm(a64)
    norm_b = np.linalg.norm(b64)
    if norm_a == 0.0 or norm_b == 0.0:
        raise ZeroVector("cosine similarity undefined for zero vectors")
    return float(np.dot(a64, b64) / (norm_a * norm_b))


@dataclass(frozen=True)
class IndexEntry:
    record_id: str
    vector: np.ndarray
    diff_text: str
    rationale: str
    source_kind: SourceKind


@dataclass(frozen=True)
class VectorIndex:
    entries: tuple[IndexEntry, ...]
    dim: int
    source_kind: SourceKind
    version: int = 1


@dataclass(frozen=True)
class IndexRecord:
    """One record prepared for indexing: the pair, its rendered diff text,
    the stored rationale, and the canonical CFG serialization (required when
    building a CFG-keyed index)."""

    pair: CodePair
    diff_text: str
    rationale: str
    cfg_text: str | None = None


def build_index(
    records: Sequence[IndexRecord],
    provider,
    source_kind: SourceKind,
    max_in_flight: int = 1,
    path: Path | str | None = None,
) -> VectorIndex:
    """Embed every record and assemble the index, persisting it to `path`
    when given. Provider failures propagate with the offending record id
    attached; the caller decides skip policy."""
    if not records:
        raise EmptyIndex("no records to index")

    seen: set[str] = set()
    texts: list[str] = []
    for record in records:
        if record.pair.id in seen:
            raise DuplicateId(record.pair.id, "index build")
        seen.add(record.pair.id)
        if source_kind is SourceKind.CFG_SERIALIZATION:
            if record.cfg_text is None:
                raise EmptyInput(f"record {record.pair.id}: missing CFG serialization")
            texts.append(record.cfg_text)
        else:
            texts.append(record.pair.original_code)

    def embed_one(args: tuple[str, str]) -> np.ndarray:
        record_id, text = args
        try:
            return embed_text(text, provider)
        except Exception as exc:
            raise type(exc)(f"record {record_id}: {exc}") from exc

    jobs = [(record.pair.id, text) for record, text in zip(records, texts)]
    if max_in_flight > 1:
        with ThreadPoolExecutor(max_workers=max_in_flight) as pool:
            vectors = list(pool.map(embed_one, jobs))  # committed in record order
    else:
        vectors = [embed_one(job) for job in jobs]

    dim = int(vectors[0].shape[0])
    for record, vector in zip(records, vectors):
        if vector.shape[0] != dim:
            raise DimMismatch(f"record {record.pair.id}: dim {vector.shape[0]} != {dim}")

    entries = tuple(
        IndexEntry(
            record_id=record.pair.id,
            vector=vector,
            diff_text=record.diff_text,
            rationale=record.rationale,
            source_kind=source_kind,
        )
        for record, vector in zip(records, vectors)
    )
    index = VectorIndex(entries=entries, dim=dim, source_kind=source_kind)
    if path is not None:
        save_index(index, path)
    return index


def vector_sidecar_path(path: Path | str) -> Path:
    return Path(str(path) + ".vec")


def save_index(index: VectorIndex, path: Path | str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = {
        "version": index.version,
        "dim": index.dim,
        "source_kind": index.source_kind.value,
        "count": len(index.entries),
    }
    with path.open("w", encoding="utf-8") as handle:
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        for entry in index.entries:
            meta = {
                "record_id": entry.record_id,
                "diff_text": entry.diff_text,
                "rationale": entry.rationale,
            }
            handle.write(json.dumps(meta, sort_keys=True, ensure_ascii=False) + "\n")
    matrix = np.stack([entry.vector for entry in index.entries]).astype("<f4")
    matrix.tofile(vector_sidecar_path(path))


def load_index(path: Path | str) -> VectorIndex:
    path = Path(path)
    with path.open("r", encoding="utf-8") as handle:
        header = json.loads(handle.readline())
        metas = [json.loads(line) for line in handle if line.strip()]
    count, dim = header["count"], header["dim"]
    if len(metas) != count:
        raise EmptyIndex(f"index metadata truncated: {len(metas)} != {count}")
    flat = np.fromfile(vector_sidecar_path(path), dtype="<f4")
    if flat.size != count * dim:
        raise DimMismatch(f"vector blob holds {flat.size} floats, expected {count * dim}")
    matrix = flat.reshape(count, dim)
    source_kind = SourceKind(header["source_kind"])
    entries = tuple(
        IndexEntry(
            record_id=meta["record_id"],
            vector=matrix[i].copy(),
            diff_text=meta["diff_text"],
            rationale=meta["rationale"],
            source_kind=source_kind,
        )
        for i, meta in enumerate(metas)
    )
    return VectorIndex(entries=entries, dim=dim, source_kind=source_kind, version=header["version"])


def retrieve_top1(index: VectorIndex, query: np.ndarray) -> tuple[IndexEntry, float]:
    """Exhaustive cosine argmax; ties go to the lexicographically smallest
    record id. Exactly one example is retrieved by design."""
    if not index.entries:
        raise EmptyIndex("index is empty")
    if query.shape != (index.dim,):
        raise DimMismatch(f"query shape {query.shape} vs index dim {index.dim}")

    best_entry: IndexEntry | None = None
    best_score = -np.inf
    for entry in index.entries:
        score = cosine_similarity(entry.vector, query)
        if (
            best_entry is None
            or score > best_score
            or (score == best_score and entry.record_id < best_entry.record_id)
        ):
            best_entry = entry
            best_score = score
    return best_entry, float(best_score)
