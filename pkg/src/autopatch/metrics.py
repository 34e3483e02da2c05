"""Lexical similarity metrics between generated and ground-truth code.

Three measures: matching-line percentage, normalized edit-distance similarity,
and matching-token percentage. Line and token overlap use multiset
intersection against the ground truth, so repeated lines and tokens count
proportionally; both are asymmetric (ground truth is the denominator).
Edit-distance similarity is symmetric.
"""

from __future__ import annotations

import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import BothEmpty, EmptyGroundTruth

# Longest-match-first C/C++ operator inventory. Single characters are caught
# by the catch-all alternative at the end of the master pattern.
_OPERATORS = [
    "<<=", ">>=", "->*", "...", "<=>",
    "::", "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=",
    "&&", "||", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "##",
]

_TOKEN_PATTERN = re.compile(
    r"""
    /\*.*?\*/            # block comment
  | //[^\n]*             # line comment
  | \s+                  # whitespace
  | "(?:\\.|[^"\\])*"    # string literal
  | '(?:\\.|[^'\\])*'    # char literal
  | 0[xX][0-9a-fA-F]+[uUlL]*                       # hex literal
  | (?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?[fFlLuU]*  # numeric literal
  | [A-Za-z_]\w*         # identifier / keyword
  | OPERATORS
  | .                    # any other byte, one token each
    """.replace("OPERATORS", "|".join(re.escape(op) for op in _OPERATORS)),
    re.VERBOSE | re.DOTALL,
)

_COMMENT_OR_WS = re.compile(r"/\*.*?\*/|//[^\n]*|\s+", re.DOTALL)


def tokenize(code: str) -> list[str]:
    """C-family lexing: identifiers, literals, and operators (longest match
    first) become one token each; comments and whitespace are dropped."""
    tokens = []
    for match in _TOKEN_PATTERN.finditer(code):
        text = match.group(0)
        if _COMMENT_OR_WS.fullmatch(text):
            continue
        tokens.append(text)
    return tokens


def _normalized_lines(text: str) -> list[str]:
    """Trimmed lines with blank and comment-only lines dropped."""
    lines = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("//"):
            continue
        if line.startswith("/*") and line.endswith("*/") and line.count("/*") == 1:
            continue
        lines.append(line)
    return lines


def normalize_whitespace(text: str) -> str:
    """Collapse all whitespace runs to single spaces (edit-distance input)."""
    return " ".join(text.split())


def line_overlap(generated: str, ground_truth: str) -> float:
    """Percentage of ground-truth lines present in the generated code
    (multiset intersection over normalized lines)."""
    truth_lines = _normalized_lines(ground_truth)
    if not truth_lines:
        raise EmptyGroundTruth("ground truth has no normalized lines")
    generated_lines = _normalized_lines(generated)
    matched = Counter(generated_lines) & Counter(truth_lines)
    return sum(matched.values()) / len(truth_lines) * 100.0


def levenshtein(a: str, b: str) -> int:
    """Character-level Levenshtein distance (row-vectorized DP)."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    if len(a) < len(b):
        a, b = b, a
    b_codes = np.frombuffer(b.encode("utf-32-le"), dtype=np.uint32)
    positions = np.arange(1, len(b) + 1, dtype=np.int64)
    previous = np.arange(len(b) + 1, dtype=np.int64)
    for i, ch in enumerate(a):
        substitution = previous[:-1] + (b_codes != ord(ch))
        current = np.empty_like(previous)
        current[0] = i + 1
        current[1:] = np.minimum(previous[1:] + 1, substitution)
        # Propagate insertions left to right: cost[j] = min_k<=j cost[k] + (j-k).
        current[1:] = np.minimum(
            current[1:],
            positions + np.minimum.accumulate(current[:-1] - positions + 1),
        )
        previous = current
    return int(previous[-1])


def edit_distance_similarity(generated: str, ground_truth: str) -> float:
    """1 - distance/max-length over whitespace-normalized text, in [0, 1]."""
    a = normalize_whitespace(generated)
    b = normalize_whitespace(ground_truth)
    if not a and not b:
        raise BothEmpty("both texts empty after normalization")
    return 1.0 - levenshtein(a, b) / max(len(a), len(b))


def token_overlap(generated: str, ground_truth: str) -> float:
    """Percentage of ground-truth tokens present in the generated code
    (multiset intersection)."""
    truth_tokens = tokenize(ground_truth)
    if not truth_tokens:
        raise EmptyGroundTruth("ground truth has no tokens")
    generated_tokens = tokenize(generated)
    matched = Counter(generated_tokens) & Counter(truth_tokens)
    return sum(matched.values()) / len(truth_tokens) * 100.0


@dataclass(frozen=True)
class LexicalScores:
    line_overlap_pct: float
    eds: float
    token_overlap_pct: float


def compute_lexical(generated: str, ground_truth: str) -> LexicalScores:
    return LexicalScores(
        line_overlap_pct=line_overlap(generated, ground_truth),
        eds=edit_distance_similarity(generated, ground_truth),
        token_overlap_pct=token_overlap(generated, ground_truth),
    )
