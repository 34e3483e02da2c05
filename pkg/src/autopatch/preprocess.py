"""Source normalization applied before handing code to the analyzer or the
compiler: umbrella includes are expanded to an explicit standard-header set,
compiler-specific attributes on the strip list are removed, and duplicate
includes are dropped. Every rewrite is logged so callers can audit what
changed; clean input passes through byte-identical.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .errors import NonUtf8Input

# Explicit replacement for the catch-all <bits/stdc++.h> include. Covers the
# standard library surface that competitive C++ actually touches.
STANDARD_HEADERS: tuple[str, ...] = (
    "algorithm",
    "array",
    "bitset",
    "cassert",
    "cctype",
    "cfloat",
    "climits",
    "cmath",
    "complex",
    "cstdio",
    "cstdint",
    "cstdlib",
    "cstring",
    "deque",
    "functional",
    "iomanip",
    "iostream",
    "iterator",
    "limits",
    "list",
    "map",
    "numeric",
    "queue",
    "random",
    "set",
    "sstream",
    "stack",
    "string",
    "tuple",
    "unordered_map",
    "unordered_set",
    "utility",
    "vector",
)

_UMBRELLA_INCLUDE = re.compile(r'^[ \t]*#[ \t]*include[ \t]*[<"]bits/stdc\+\+\.h[>"].*$')
_INCLUDE_LINE = re.compile(r'^[ \t]*#[ \t]*include[ \t]*[<"][^<>"]+[>"]')

# Attribute constructs the analyzer toolchain rejects or warns about.
DEFAULT_STRIP_PATTERNS: tuple[str, ...] = (
    r"__attribute__\s*\(\(.*?\)\)",
    r"__forceinline\b",
    r"__declspec\s*\([^)]*\)",
)
_STRIP_LINE_PATTERNS: tuple[str, ...] = (
    r"^[ \t]*#[ \t]*pragma[ \t]+GCC[ \t]+(optimize|target)\b.*$",
)


@dataclass
class PreprocessConfig:
    strip_patterns: tuple[str, ...] = DEFAULT_STRIP_PATTERNS
    strip_line_patterns: tuple[str, ...] = _STRIP_LINE_PATTERNS


@dataclass
class PreprocessReport:
    output_code: str
    actions: list[str] = field(default_factory=list)


def preprocess_source(code: str | bytes, config: PreprocessConfig | None = None) -> PreprocessReport:
    if isinstance(code, bytes):
        try:
            code = code.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise NonUtf8Input(str(exc)) from None
    else:
        try:
            code.encode("utf-8")
        except UnicodeEncodeError as exc:
            raise NonUtf8Input(str(exc)) from None

    config = config or PreprocessConfig()
    actions: list[str] = []
    lines = code.split("\n")
    out_lines: list[str] = []
    seen_includes: set[str] = set()
    line_strippers = [re.compile(p) for p in config.strip_line_patterns]
    inline_strippers = [re.compile(p, re.DOTALL) for p in config.strip_patterns]

    def include_key(text: str) -> str:
        return text.replace(" ", "").replace("\t", "")

    for line in lines:
        if _UMBRELLA_INCLUDE.match(line):
            actions.append("replaced umbrella include bits/stdc++.h with explicit standard headers")
            for header in STANDARD_HEADERS:
                include = f"#include <{header}>"
                if include_key(include) not in seen_includes:
                    seen_includes.add(include_key(include))
                    out_lines.append(include)
            continue

        stripped_whole_line = False
        for pattern in line_strippers:
            if pattern.match(line):
                actions.append(f"removed unsupported directive: {line.strip()}")
                stripped_whole_line = True
                break
        if stripped_whole_line:
            continue

        include_match = _INCLUDE_LINE.match(line)
        if include_match:
            key = include_key(include_match.group(0))
            if key in seen_includes:
                actions.append(f"removed duplicate include: {line.strip()}")
                continue
            seen_includes.add(key)

        new_line = line
        for pattern in inline_strippers:
            new_line, count = pattern.subn("", new_line)
            if count:
                actions.append(f"removed {count} attribute(s) matching {pattern.pattern!r}")
        out_lines.append(new_line)

    return PreprocessReport(output_code="\n".join(out_lines), actions=actions)
