from __future__ import annotations

import shutil
from dataclasses import dataclass
from pathlib import Path

import pytest

from autopatch.corpus import write_corpus
from autopatch.pipeline import run_index, run_ingest, run_optimize
from autopatch.prompting import Cassette, LlmClient, LlmConfig, PromptMode
from autopatch.retrieval import LocalHashingProvider

from helpers import fixture_pairs, make_scripted_transport

HAVE_CLANG = shutil.which("clang") is not None
HAVE_GXX = shutil.which("g++") is not None

requires_clang = pytest.mark.skipif(not HAVE_CLANG, reason="clang not on PATH")
requires_gxx = pytest.mark.skipif(not HAVE_GXX, reason="g++ not on PATH")
requires_toolchain = pytest.mark.skipif(
    not (HAVE_CLANG and HAVE_GXX), reason="clang and g++ required"
)

FIXTURES = Path(__file__).parent / "fixtures"
DUMP_DIR = FIXTURES / "cfg_dumps"
GOLDEN_DIR = FIXTURES / "golden"

DB_COUNT = 7
SEED = 7
ALL_MODES = (PromptMode.ZERO_SHOT, PromptMode.NAIVE, PromptMode.CONTEXT)


@pytest.fixture(scope="session")
def pairs():
    return fixture_pairs()


@pytest.fixture(scope="session")
def corpus_file(tmp_path_factory, pairs) -> Path:
    path = tmp_path_factory.mktemp("corpus") / "pairs.jsonl"
    write_corpus(pairs, path)
    return path


@dataclass
class RecordedWorkspace:
    """Fixture corpus plus a cassette prerecorded against the scripted
    transport, ready for offline replay runs."""

    corpus_file: Path
    split_manifest: Path
    cassette: Path
    record_dir: Path


@pytest.fixture(scope="session")
def recorded_workspace(tmp_path_factory, pairs, corpus_file) -> RecordedWorkspace:
    if not (HAVE_CLANG and HAVE_GXX):
        pytest.skip("clang and g++ required to prepare the recorded workspace")
    root = tmp_path_factory.mktemp("workspace")
    ingest = run_ingest(corpus_file, DB_COUNT, SEED, root / "ingest")

    cassette_path = root / "cassette.json"
    recorder = LlmClient(
        LlmConfig(),
        Cassette(cassette_path),
        mode="record",
        transport=make_scripted_transport(pairs),
    )
    provider = LocalHashingProvider()
    record_dir = root / "record"
    index_result = run_index(
        ingest.corpus, ingest.split, record_dir / "index", provider, recorder
    )
    assert not index_result.skipped, f"fixture corpus must index cleanly: {index_result.skipped}"
    optimize_result = run_optimize(
        ingest.corpus,
        ingest.split,
        record_dir / "index",
        record_dir / "patches",
        ALL_MODES,
        recorder,
        provider,
    )
    assert not optimize_result.failures, optimize_result.failures
    return RecordedWorkspace(
        corpus_file=corpus_file,
        split_manifest=ingest.manifest_path,
        cassette=cassette_path,
        record_dir=record_dir,
    )
