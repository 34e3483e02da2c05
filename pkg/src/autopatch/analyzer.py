"""Drive the external C++ static analyzer and parse its CFG dump.

The analyzer is invoked as a subprocess in CFG-dump mode; the dump is a
per-function textual listing shaped like

    int main()
     [B3 (ENTRY)]
       Succs (1): B2
     [B2]
       1: x
       2: [B2.1]++
       T: while [B2.2]
       Preds (2): B1 B3
       Succs (2): B1 B0
     [B0 (EXIT)]
       Preds (1): B1

Blocks are introduced by `[Bn]` headers, statements are numbered, `T:` carries
the terminator, and edges come from the `Succs` lines (`Preds` is redundant
and only validated syntactically). `NULL` successors mark edges the analyzer
constant-folded away and are skipped. Unknown indented lines inside a block
(labels, exotic element kinds) are preserved verbatim as opaque statements,
never dropped.
"""

from __future__ import annotations

import os
import re
import shlex
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

from .cfg import BasicBlock, ControlFlowGraph, normalize_statement
from .errors import AnalyzerFailed, AnalyzerNotFound, FunctionNotFound, NonUtf8Input, ParseError

ANALYZER_PATH_ENV = "AUTOPATCH_ANALYZER_PATH"
ANALYZER_FLAGS_ENV = "AUTOPATCH_ANALYZER_FLAGS"

# max-nodes=1 skips path-sensitive exploration (the dump is emitted from the
# AST callback, so the graph is unaffected); silence-checkers drops analyzer
# reports that would otherwise interleave with the dump on stderr.
_DEFAULT_ARGS = (
    "--analyze",
    "-Xclang",
    "-analyzer-checker=debug.DumpCFG",
    "-Xclang",
    "-analyzer-config",
    "-Xclang",
    "max-nodes=1,silence-checkers=core;cplusplus;deadcode;nullability;optin;security;unix;osx",
    "-w",
    "-fno-caret-diagnostics",
    "-fno-color-diagnostics",
)


@dataclass
class AnalyzerConfig:
    binary: str = "clang"
    std: str = "c++17"
    extra_flags: tuple[str, ...] = ()
    function: str = "main"
    dump_stream: str = "stderr"  # "stderr" | "stdout" | "both"
    timeout_s: float = 120.0

    @classmethod
    def from_env(cls, **overrides) -> "AnalyzerConfig":
        config = cls(**overrides)
        env_binary = os.environ.get(ANALYZER_PATH_ENV)
        if env_binary:
            config.binary = env_binary
        env_flags = os.environ.get(ANALYZER_FLAGS_ENV)
        if env_flags:
            config.extra_flags = config.extra_flags + tuple(shlex.split(env_flags))
        return config


_BLOCK_HEADER = re.compile(r"^\s*\[B(\d+)(?:\s*\(([A-Z /]+)\))?\]$")
_STATEMENT = re.compile(r"^\s+(\d+): (.*)$")
_TERMINATOR = re.compile(r"^\s+T: (.*)$")
_PREDS = re.compile(r"^\s+Preds \((\d+)\):(.*)$")
_SUCCS = re.compile(r"^\s+Succs \((\d+)\):(.*)$")
_SUCC_REF = re.compile(r"^B(\d+)(?:\((\w+)\))?$")
_DIAGNOSTIC = re.compile(r"^\S.*:\d+(?::\d+)?: (?:warning|error|note): ")
_DIAG_TRAILER = re.compile(r"^\d+ (?:warning|error)s? generated\.$")


def _strip_diagnostics(text: str) -> str:
    kept = []
    for line in text.splitlines():
        if _DIAGNOSTIC.match(line) or _DIAG_TRAILER.match(line):
            continue
        kept.append(line)
    return "\n".join(kept)


def split_dump_functions(dump: str) -> list[tuple[str, str]]:
    """Split a multi-function dump into (signature, section) pairs.

    A section starts at a nonblank column-0 line and runs until the next one.
    """
    sections: list[tuple[str, list[str]]] = []
    for line in dump.splitlines():
        if line and not line[0].isspace():
            sections.append((line.strip(), []))
        elif sections:
            sections[-1][1].append(line)
    return [(sig, "\n".join(body)) for sig, body in sections]


def _signature_name(signature: str) -> str:
    """Extract the (possibly qualified) function name from a dump signature
    line such as `int helper(int a)` or `void S::f()`."""
    head = signature.split("(", 1)[0].strip()
    match = re.search(r"[\w:~]+$", head)
    return match.group(0) if match else head


def parse_cfg_dump(dump: str) -> ControlFlowGraph:
    """Parse one function's dump section into a ControlFlowGraph.

    Raises ParseError on unrecognized structural lines, dangling successor
    references, or a missing ENTRY/EXIT block.
    """
    blocks: list[BasicBlock] = []
    entry_id: int | None = None
    exit_id: int | None = None
    edges: set[tuple[int, int]] = set()

    current_id: int | None = None
    current_statements: list[str] = []
    current_terminator: str | None = None
    seen_signature = False

    def flush():
        nonlocal current_id, current_statements, current_terminator
        if current_id is not None:
            blocks.append(
                BasicBlock(
                    id=current_id,
                    statements=tuple(current_statements),
                    terminator=current_terminator,
                )
            )
        current_id = None
        current_statements = []
        current_terminator = None

    for line_no, line in enumerate(dump.splitlines(), start=1):
        if not line.strip():
            continue

        header = _BLOCK_HEADER.match(line)
        if header is not None:
            flush()
            current_id = int(header.group(1))
            annotation = header.group(2) or ""
            if "ENTRY" in annotation:
                if entry_id is not None:
                    raise ParseError(line_no, "second ENTRY block")
                entry_id = current_id
            if "EXIT" in annotation:
                if exit_id is not None:
                    raise ParseError(line_no, "second EXIT block")
                exit_id = current_id
            continue

        if not line[0].isspace():
            # Column-0 text is a function signature: one is allowed as the
            # section heading, a second means the caller passed a whole
            # multi-function dump (use split_dump_functions for that).
            if seen_signature or blocks or current_id is not None:
                raise ParseError(line_no, f"unexpected section line {line.strip()!r}")
            seen_signature = True
            continue

        if current_id is None:
            raise ParseError(line_no, f"content outside any block: {line.strip()!r}")

        statement = _STATEMENT.match(line)
        if statement is not None:
            current_statements.append(normalize_statement(statement.group(2)))
            continue

        terminator = _TERMINATOR.match(line)
        if terminator is not None:
            current_terminator = normalize_statement(terminator.group(1))
            continue

        if _PREDS.match(line) is not None:
            continue  # redundant with Succs of the predecessors

        succs = _SUCCS.match(line)
        if succs is not None:
            for token in succs.group(2).split():
                if token == "NULL":
                    continue
                ref = _SUCC_REF.match(token)
                if ref is None:
                    raise ParseError(line_no, f"unrecognized successor {token!r}")
                edges.add((current_id, int(ref.group(1))))
            continue

        # Anything else indented inside a block (case labels, new element
        # kinds) is kept verbatim as an opaque statement.
        current_statements.append(normalize_statement(line))

    flush()

    if not blocks:
        raise ParseError(0, "no blocks found in dump")
    if entry_id is None:
        raise ParseError(0, "no ENTRY block in dump")
    if exit_id is None:
        raise ParseError(0, "no EXIT block in dump")

    known_ids = {b.id for b in blocks}
    for src, dst in edges:
        if dst not in known_ids:
            raise ParseError(0, f"successor reference to missing block B{dst}")

    try:
        return ControlFlowGraph(
            blocks=tuple(blocks),
            entry_id=entry_id,
            exit_id=exit_id,
            edges=frozenset(edges),
        )
    except ValueError as exc:
        raise ParseError(0, str(exc)) from None


def format_as_dump(cfg: ControlFlowGraph) -> str:
    """Re-emit a graph in the analyzer's dump syntax (round-trip aid)."""
    lines = ["reconstructed()"]
    ordered = sorted(cfg.blocks, key=lambda b: -b.id)
    for block in ordered:
        if block.id == cfg.entry_id:
            lines.append(f" [B{block.id} (ENTRY)]")
        elif block.id == cfg.exit_id:
            lines.append(f" [B{block.id} (EXIT)]")
        else:
            lines.append(f" [B{block.id}]")
        for index, statement in enumerate(block.statements, start=1):
            lines.append(f"{index:>4}: {statement}")
        if block.terminator is not None:
            lines.append(f"   T: {block.terminator}")
        succs = cfg.successors(block.id)
        if succs:
            refs = " ".join(f"B{s}" for s in succs)
            lines.append(f"   Succs ({len(succs)}): {refs}")
        lines.append("")
    return "\n".join(lines)


def run_analyzer(code: str, config: AnalyzerConfig) -> str:
    """Invoke the analyzer on `code` and return the raw dump text."""
    try:
        encoded = code.encode("utf-8")
    except UnicodeEncodeError as exc:
        raise NonUtf8Input(str(exc)) from None

    binary = shutil.which(config.binary)
    if binary is None:
        raise AnalyzerNotFound(f"analyzer binary {config.binary!r} not on PATH")

    with tempfile.TemporaryDirectory(prefix="autopatch-cfg-") as workdir:
        source = Path(workdir) / "input.cpp"
        source.write_bytes(encoded)
        plist = Path(workdir) / "out.plist"
        argv = [
            binary,
            *_DEFAULT_ARGS,
            f"-std={config.std}",
            *config.extra_flags,
            str(source),
            "-o",
            str(plist),
        ]
        try:
            proc = subprocess.run(
                argv,
                capture_output=True,
                text=True,
                timeout=config.timeout_s,
            )
        except subprocess.TimeoutExpired:
            raise AnalyzerFailed(-1, f"analyzer timed out after {config.timeout_s}s") from None
    if proc.returncode != 0:
        raise AnalyzerFailed(proc.returncode, proc.stderr)

    if config.dump_stream == "stdout":
        return proc.stdout
    if config.dump_stream == "both":
        return proc.stdout + proc.stderr
    return proc.stderr


def extract_cfg(
    code: str,
    function: str | None = None,
    config: AnalyzerConfig | None = None,
) -> ControlFlowGraph:
    """Run the analyzer on preprocessed source and parse the CFG of one
    function (default taken from the config, normally `main`)."""
    config = config or AnalyzerConfig.from_env()
    target = function or config.function

    dump = _strip_diagnostics(run_analyzer(code, config))
    sections = split_dump_functions(dump)
    if not sections:
        raise FunctionNotFound(f"analyzer produced no CFG dump (looking for {target!r})")

    for signature, body in sections:
        name = _signature_name(signature)
        if name == target or name.split("::")[-1] == target:
            return parse_cfg_dump(body)

    available = ", ".join(_signature_name(sig) for sig, _ in sections)
    raise FunctionNotFound(f"function {target!r} not in dump (found: {available})")
