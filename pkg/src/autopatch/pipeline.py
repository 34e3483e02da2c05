"""End-to-end orchestration behind the CLI subcommands.

Each stage is per-record skip-and-log: one bad program never aborts a batch
run, it lands in a journal or failures manifest with a reason and the stage
carries on. Given identical inputs, seeds, and cassettes, every stage writes
byte-identical artifacts (timing measurements aside).
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus as corpus_mod
from .analyzer import AnalyzerConfig, extract_cfg
from .cfg import serialize_cfg
from .cfg_diff import compute_diff, render_diff
from .corpus import Corpus, CodePair, CorpusSplit, load_record
from .errors import AutopatchError, NoCommonExecutableSet
from .harness import (
    RunOutcome,
    RunStatus,
    ToolchainConfig,
    compile_program,
    measure_execution,
)
from .metrics import compute_lexical
from .preprocess import preprocess_source
from .prompting import LlmClient, PromptMode, build_prompt, generate_patch, generate_rationale
from .report import EvaluationReport, EvalResult, aggregate_report
from .retrieval import (
    IndexRecord,
    SourceKind,
    VectorIndex,
    build_index,
    embed_text,
    load_index,
    retrieve_top1,
)

logger = logging.getLogger(__name__)

SPLIT_MANIFEST = "split.json"
INDEX_JOURNAL = "index_journal.jsonl"
FAILURES_MANIFEST = "failures.json"

_INDEX_FILES = {
    SourceKind.CFG_SERIALIZATION: "index_cfg.jsonl",
    SourceKind.RAW_SOURCE: "index_source.jsonl",
}

_MODE_SOURCE_KIND = {
    PromptMode.NAIVE: SourceKind.RAW_SOURCE,
    PromptMode.CONTEXT: SourceKind.CFG_SERIALIZATION,
}


def _write_json(path: Path, payload) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")


# --- ingest -----------------------------------------------------------------


@dataclass
class IngestResult:
    corpus: Corpus
    split: CorpusSplit
    manifest_path: Path


def run_ingest(
    corpus_path: Path | str,
    db_count: int,
    seed: int,
    out_dir: Path | str,
    strict: bool = False,
) -> IngestResult:
    corpus = corpus_mod.ingest_pairs(corpus_path, strict=strict)
    split = corpus_mod.split_corpus(corpus.pairs, db_count, seed)
    out_dir = Path(out_dir)
    manifest = {
        "database_count": db_count,
        "seed": seed,
        "database_ids": [p.id for p in split.database_set],
        "test_ids": [p.id for p in split.test_set],
    }
    manifest_path = out_dir / SPLIT_MANIFEST
    _write_json(manifest_path, manifest)
    return IngestResult(corpus=corpus, split=split, manifest_path=manifest_path)


def load_split(corpus: Corpus, manifest_path: Path | str) -> CorpusSplit:
    manifest = json.loads(Path(manifest_path).read_text(encoding="utf-8"))
    return CorpusSplit(
        database_set=tuple(load_record(corpus, i) for i in manifest["database_ids"]),
        test_set=tuple(load_record(corpus, i) for i in manifest["test_ids"]),
    )


# --- index ------------------------------------------------------------------


@dataclass
class IndexResult:
    built: dict[SourceKind, Path]
    indexed_count: int
    skipped: list[dict] = field(default_factory=list)


def index_path(index_dir: Path | str, kind: SourceKind) -> Path:
    return Path(index_dir) / _INDEX_FILES[kind]


def _prepare_record(
    pair: CodePair,
    llm: LlmClient,
    analyzer_config: AnalyzerConfig,
) -> dict:
    """Preprocess both sides, extract CFGs, diff them, and obtain a rationale.
    Returns the journal payload for one successfully prepared record."""
    original = preprocess_source(pair.original_code).output_code
    optimized = preprocess_source(pair.optimized_code).output_code
    g_o = extract_cfg(original, config=analyzer_config)
    g_p = extract_cfg(optimized, config=analyzer_config)
    diff = compute_diff(g_o, g_p)
    rationale = pair.rationale or generate_rationale(diff, pair, llm)
    return {
        "record_id": pair.id,
        "status": "ok",
        "cfg_text": serialize_cfg(g_o),
        "diff_text": render_diff(diff, g_o, g_p),
        "rationale": rationale,
    }


def _load_journal(path: Path) -> dict[str, dict]:
    if not path.exists():
        return {}
    entries = {}
    with path.open("r", encoding="utf-8") as handle:
        for line in handle:
            if line.strip():
                obj = json.loads(line)
                entries[obj["record_id"]] = obj
    return entries


def run_index(
    corpus: Corpus,
    split: CorpusSplit,
    out_dir: Path | str,
    provider,
    llm: LlmClient,
    kinds: tuple[SourceKind, ...] = (SourceKind.CFG_SERIALIZATION, SourceKind.RAW_SOURCE),
    analyzer_config: AnalyzerConfig | None = None,
    resume: bool = True,
) -> IndexResult:
    """Build the vector index(es) over the database split.

    Preparation results are journaled per record, so a rerun reuses finished
    records and retries failed ones; per-record failures are logged and
    skipped, never fatal.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    analyzer_config = analyzer_config or AnalyzerConfig.from_env()

    journal_path = out_dir / INDEX_JOURNAL
    previous = _load_journal(journal_path) if resume else {}

    prepared: list[dict] = []
    skipped: list[dict] = []
    for pair in split.database_set:
        cached = previous.get(pair.id)
        if cached is not None and cached.get("status") == "ok":
            prepared.append(cached)
            continue
        try:
            prepared.append(_prepare_record(pair, llm, analyzer_config))
        except AutopatchError as exc:
            entry = {"record_id": pair.id, "status": "failed", "reason": str(exc)}
            skipped.append(entry)
            logger.warning("index: skipping %s: %s", pair.id, exc)

    with journal_path.open("w", encoding="utf-8") as handle:
        for entry in prepared + skipped:
            handle.write(json.dumps(entry, sort_keys=True, ensure_ascii=False) + "\n")

    built: dict[SourceKind, Path] = {}
    if prepared:
        records = [
            IndexRecord(
                pair=load_record(corpus, entry["record_id"]),
                diff_text=entry["diff_text"],
                rationale=entry["rationale"],
                cfg_text=entry["cfg_text"],
            )
            for entry in prepared
        ]
        for kind in kinds:
            path = index_path(out_dir, kind)
            build_index(records, provider, kind, path=path)
            built[kind] = path

    return IndexResult(built=built, indexed_count=len(prepared), skipped=skipped)


# --- optimize ----------------------------------------------------------------


@dataclass
class OptimizeResult:
    patch_dir: Path
    written: dict[str, list[str]]
    failures: list[dict] = field(default_factory=list)


def patch_path(patch_dir: Path | str, mode: PromptMode, target_id: str) -> Path:
    return Path(patch_dir) / mode.value / f"{target_id}.cpp"


def run_optimize(
    corpus: Corpus,
    split: CorpusSplit,
    index_dir: Path | str,
    out_dir: Path | str,
    modes: tuple[PromptMode, ...],
    llm: LlmClient,
    provider,
    analyzer_config: AnalyzerConfig | None = None,
) -> OptimizeResult:
    """Generate one patch per test record per requested mode."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    analyzer_config = analyzer_config or AnalyzerConfig.from_env()

    indexes: dict[SourceKind, VectorIndex] = {}
    for mode in modes:
        kind = _MODE_SOURCE_KIND.get(mode)
        if kind is not None and kind not in indexes:
            indexes[kind] = load_index(index_path(index_dir, kind))

    written: dict[str, list[str]] = {mode.value: [] for mode in modes}
    failures: list[dict] = []

    for pair in split.test_set:
        for mode in modes:
            try:
                prompt = _build_mode_prompt(pair, mode, indexes, corpus, provider, analyzer_config)
                patch = generate_patch(prompt, llm)
            except AutopatchError as exc:
                failures.append({"record_id": pair.id, "mode": mode.value, "reason": str(exc)})
                logger.warning("optimize: %s/%s failed: %s", mode.value, pair.id, exc)
                continue
            destination = patch_path(out_dir, mode, pair.id)
            destination.parent.mkdir(parents=True, exist_ok=True)
            destination.write_text(patch.code, encoding="utf-8")
            written[mode.value].append(pair.id)

    _write_json(out_dir / FAILURES_MANIFEST, failures)
    return OptimizeResult(patch_dir=out_dir, written=written, failures=failures)


def _build_mode_prompt(
    pair: CodePair,
    mode: PromptMode,
    indexes: dict[SourceKind, VectorIndex],
    corpus: Corpus,
    provider,
    analyzer_config: AnalyzerConfig,
):
    if mode is PromptMode.ZERO_SHOT:
        return build_prompt(mode, pair)

    if mode is PromptMode.NAIVE:
        index = indexes[SourceKind.RAW_SOURCE]
        query = embed_text(pair.original_code, provider)
        entry, _ = retrieve_top1(index, query)
        return build_prompt(mode, pair, example=load_record(corpus, entry.record_id))

    index = indexes[SourceKind.CFG_SERIALIZATION]
    preprocessed = preprocess_source(pair.original_code).output_code
    graph = extract_cfg(preprocessed, config=analyzer_config)
    query = embed_text(serialize_cfg(graph), provider)
    entry, _ = retrieve_top1(index, query)
    return build_prompt(
        mode,
        pair,
        diff=entry.diff_text,
        rationale=entry.rationale,
        example=load_record(corpus, entry.record_id),
    )


# --- eval --------------------------------------------------------------------


@dataclass
class EvalRunResult:
    report: EvaluationReport
    report_json_path: Path
    report_text_path: Path
    failures: list[dict] = field(default_factory=list)
    common_empty: bool = False


def run_eval(
    corpus: Corpus,
    split: CorpusSplit,
    patch_dir: Path | str,
    out_dir: Path | str,
    modes: tuple[PromptMode, ...],
    reps: int,
    timeout_s: float,
    toolchain: ToolchainConfig | None = None,
    parameters: dict | None = None,
) -> EvalRunResult:
    """Score every patch lexically against the ground truth, compile it, time
    it against the record's testcases, and aggregate the report."""
    patch_dir = Path(patch_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    toolchain = toolchain or ToolchainConfig.from_env()

    results: list[EvalResult] = []
    failures: list[dict] = []

    for pair in split.test_set:
        for mode in modes:
            source = patch_path(patch_dir, mode, pair.id)
            if not source.exists():
                failures.append(
                    {"record_id": pair.id, "mode": mode.value, "reason": "patch missing"}
                )
                continue
            code = source.read_text(encoding="utf-8")
            lexical = compute_lexical(code, pair.optimized_code)

            if not pair.testcases:
                failures.append(
                    {"record_id": pair.id, "mode": mode.value, "reason": "no testcases"}
                )
                continue

            try:
                binary = compile_program(
                    code, toolchain, out_dir / "bin" / mode.value / pair.id
                )
            except AutopatchError as exc:
                outcome = RunOutcome.failure(RunStatus.COMPILE_ERROR, str(exc))
            else:
                outcome = measure_execution(binary, pair.testcases, reps, timeout_s)

            results.append(
                EvalResult(
                    target_id=pair.id,
                    mode=mode.value,
                    lexical=lexical,
                    outcome=outcome,
                    labels=pair.labels,
                )
            )

    parameters = dict(parameters or {})
    parameters.update({"reps": reps, "timeout_s": timeout_s})

    common_empty = False
    if not results:
        common_empty = True
        parameters["no_common_executable_set"] = True
        report = EvaluationReport(
            modes={}, common_executable_ids=(), evaluated_count=0, parameters=parameters
        )
    else:
        try:
            report = aggregate_report(results, parameters=parameters)
        except NoCommonExecutableSet:
            common_empty = True
            parameters["no_common_executable_set"] = True
            report = aggregate_report(results, parameters=parameters, allow_empty_common=True)

    payload = report.to_json_dict()
    payload["generated_at"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    json_path = out_dir / "report.json"
    text_path = out_dir / "report.txt"
    _write_json(json_path, payload)
    text_path.write_text(report.render_text(), encoding="utf-8")
    _write_json(out_dir / FAILURES_MANIFEST, failures)

    return EvalRunResult(
        report=report,
        report_json_path=json_path,
        report_text_path=text_path,
        failures=failures,
        common_empty=common_empty,
    )
