"""Compile generated programs and time them against stdin/stdout testcases.

Timing discipline: per testcase one untimed warmup run, then `reps` timed
runs; the testcase's time is the median of the reps (suppressing scheduler
outliers) and the program's time is the mean across testcases. Output
comparison uses the corpus normalization rule. Timed execution is meant to be
run sequentially, one benchmark at a time; compilation can parallelize.
"""

from __future__ import annotations

import os
import shlex
import shutil
import statistics
import subprocess
import tempfile
import time
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

from .corpus import TestCase, normalize_output
from .errors import BinaryNotFound, CompileError, CompilerNotFound

CXX_ENV = "AUTOPATCH_CXX"
CXXFLAGS_ENV = "AUTOPATCH_CXXFLAGS"

DEFAULT_REPS = 5
DEFAULT_TIMEOUT_S = 10.0


@dataclass
class ToolchainConfig:
    compiler: str = "g++"
    flags: tuple[str, ...] = ("-O2", "-std=c++17")
    compile_timeout_s: float = 120.0

    @classmethod
    def from_env(cls, **overrides) -> "ToolchainConfig":
        config = cls(**overrides)
        env_compiler = os.environ.get(CXX_ENV)
        if env_compiler:
            config.compiler = env_compiler
        env_flags = os.environ.get(CXXFLAGS_ENV)
        if env_flags:
            config.flags = tuple(shlex.split(env_flags))
        return config


class RunStatus(Enum):
    OK = "ok"
    COMPILE_ERROR = "compile_error"
    WRONG_OUTPUT = "wrong_output"
    TIMEOUT = "timeout"
    CRASH = "crash"


@dataclass(frozen=True)
class RunOutcome:
    status: RunStatus
    per_testcase_times_s: tuple[float, ...] | None = None
    mean_s: float | None = None
    median_s: float | None = None
    detail: str = ""

    @classmethod
    def failure(cls, status: RunStatus, detail: str = "") -> "RunOutcome":
        return cls(status=status, detail=detail)


def compile_program(
    code: str,
    toolchain: ToolchainConfig | None = None,
    out_dir: Path | str | None = None,
    name: str = "program",
) -> Path:
    """Compile to a binary and return its path. The binary lands in `out_dir`
    when given, else in a fresh temp directory the caller may clean up."""
    toolchain = toolchain or ToolchainConfig.from_env()
    compiler = shutil.which(toolchain.compiler)
    if compiler is None:
        raise CompilerNotFound(f"compiler {toolchain.compiler!r} not on PATH")

    if out_dir is None:
        out_dir = Path(tempfile.mkdtemp(prefix="autopatch-bin-"))
    else:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)

    source = out_dir / f"{name}.cpp"
    source.write_text(code, encoding="utf-8")
    binary = out_dir / name
    try:
        proc = subprocess.run(
            [compiler, str(source), "-o", str(binary), *toolchain.flags],
            capture_output=True,
            text=True,
            timeout=toolchain.compile_timeout_s,
        )
    except subprocess.TimeoutExpired:
        raise CompileError(f"compiler timed out after {toolchain.compile_timeout_s}s") from None
    if proc.returncode != 0:
        raise CompileError(proc.stderr)
    return binary


def _run_once(binary: Path, testcase: TestCase, timeout_s: float) -> tuple[RunStatus, float, str]:
    start = time.perf_counter()
    try:
        proc = subprocess.run(
            [str(binary)],
            input=testcase.input.encode("utf-8"),
            capture_output=True,
            timeout=timeout_s,
        )
    except subprocess.TimeoutExpired:
        return RunStatus.TIMEOUT, timeout_s, f"exceeded {timeout_s}s"
    elapsed = time.perf_counter() - start
    if proc.returncode != 0:
        return RunStatus.CRASH, elapsed, f"exit code {proc.returncode}"
    actual = normalize_output(proc.stdout.decode("utf-8", "replace"))
    expected = normalize_output(testcase.expected_output)
    if actual != expected:
        return RunStatus.WRONG_OUTPUT, elapsed, f"expected {expected!r}, got {actual!r}"
    return RunStatus.OK, elapsed, ""


def measure_execution(
    binary: Path | str,
    testcases: Sequence[TestCase],
    reps: int = DEFAULT_REPS,
    timeout_s: float = DEFAULT_TIMEOUT_S,
) -> RunOutcome:
    """Run every testcase with warmup and repetitions; any wrong output,
    timeout, or nonzero exit fails the whole program."""
    binary = Path(binary)
    if not binary.exists():
        raise BinaryNotFound(str(binary))
    if reps < 1:
        raise ValueError("reps must be >= 1")
    if not testcases:
        raise ValueError("testcases must be nonempty")

    per_testcase: list[float] = []
    for case_no, testcase in enumerate(testcases):
        status, _, detail = _run_once(binary, testcase, timeout_s)  # warmup
        if status is not RunStatus.OK:
            return RunOutcome.failure(status, f"testcase {case_no}: {detail}")
        rep_times = []
        for _ in range(reps):
            status, elapsed, detail = _run_once(binary, testcase, timeout_s)
            if status is not RunStatus.OK:
                return RunOutcome.failure(status, f"testcase {case_no}: {detail}")
            rep_times.append(elapsed)
        per_testcase.append(statistics.median(rep_times))

    return RunOutcome(
        status=RunStatus.OK,
        per_testcase_times_s=tuple(per_testcase),
        mean_s=statistics.fmean(per_testcase),
        median_s=statistics.median(per_testcase),
    )
