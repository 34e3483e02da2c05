"""Diff two control-flow graphs.

The delta has three parts: block-level changes (blocks added or removed),
flow changes (edges added or removed, expressed over the original graph's id
space), and content changes (statement-level edit scripts for matched blocks
whose content differs).

Matching between the two graphs runs in two deterministic passes:

1. exact match on the normalized content-line tuple, ties broken by ascending
   id distance, then lowest original-side id;
2. greedy best-first match over the leftovers by token-set Jaccard similarity
   of block content, accepting pairs scoring at least 0.5.

Greedy keeps the cost at O(n^2) per graph pair, which is what corpus-scale
diffing needs; graph-edit-distance optimality is explicitly not a goal.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass

from .cfg import BasicBlock, ControlFlowGraph
from .metrics import tokenize

JACCARD_ACCEPT_THRESHOLD = 0.5


@dataclass(frozen=True)
class BlockMatching:
    pairs: tuple[tuple[int, int], ...]
    unmatched_o: frozenset[int]
    unmatched_p: frozenset[int]


@dataclass(frozen=True, order=True)
class EdgeRef:
    """Edge endpoint in the diff's id space: `o` ids live in the original
    graph, `p` ids are blocks that exist only in the optimized graph."""

    graph: str  # "o" | "p"
    block_id: int

    def render(self) -> str:
        if self.graph == "p":
            return f"new:B{self.block_id}"
        return f"B{self.block_id}"


@dataclass(frozen=True)
class BlockChanges:
    added: frozenset[int]
    removed: frozenset[int]

    def is_empty(self) -> bool:
        return not self.added and not self.removed


@dataclass(frozen=True)
class EdgeChanges:
    added: frozenset[tuple[EdgeRef, EdgeRef]]
    removed: frozenset[tuple[EdgeRef, EdgeRef]]

    def is_empty(self) -> bool:
        return not self.added and not self.removed


@dataclass(frozen=True)
class StatementEdit:
    op: str  # "insert" | "delete" | "replace"
    old: tuple[str, ...]
    new: tuple[str, ...]


@dataclass(frozen=True)
class ContentChange:
    o_id: int
    p_id: int
    edits: tuple[StatementEdit, ...]


@dataclass(frozen=True)
class CfgDiff:
    delta_s: BlockChanges
    delta_f: EdgeChanges
    delta_c: tuple[ContentChange, ...]

    def is_empty(self) -> bool:
        return self.delta_s.is_empty() and self.delta_f.is_empty() and not self.delta_c


def _block_tokens(block: BasicBlock) -> frozenset[str]:
    tokens: set[str] = set()
    for line in block.content_lines():
        tokens.update(tokenize(line))
    return frozenset(tokens)


def jaccard(a: frozenset[str], b: frozenset[str]) -> float:
    if not a and not b:
        return 1.0
    union = len(a | b)
    return len(a & b) / union


def match_blocks(g_o: ControlFlowGraph, g_p: ControlFlowGraph) -> BlockMatching:
    free_o = {b.id: b for b in g_o.blocks}
    free_p = {b.id: b for b in g_p.blocks}
    pairs: list[tuple[int, int]] = []

    # Pass 1: exact content.
    by_content_o: dict[tuple[str, ...], list[int]] = {}
    for block in g_o.blocks:
        by_content_o.setdefault(block.content_lines(), []).append(block.id)
    by_content_p: dict[tuple[str, ...], list[int]] = {}
    for block in g_p.blocks:
        by_content_p.setdefault(block.content_lines(), []).append(block.id)

    for content, o_ids in sorted(by_content_o.items()):
        p_ids = by_content_p.get(content)
        if not p_ids:
            continue
        candidates = sorted(
            ((abs(o - p), o, p) for o in o_ids for p in p_ids),
        )
        for _, o_id, p_id in candidates:
            if o_id in free_o and p_id in free_p:
                pairs.append((o_id, p_id))
                del free_o[o_id]
                del free_p[p_id]

    # Pass 2: greedy token-set similarity over the leftovers.
    if free_o and free_p:
        tokens_o = {o_id: _block_tokens(block) for o_id, block in free_o.items()}
        tokens_p = {p_id: _block_tokens(block) for p_id, block in free_p.items()}
        scored = sorted(
            (
                (-jaccard(tokens_o[o_id], tokens_p[p_id]), abs(o_id - p_id), o_id, p_id)
                for o_id in free_o
                for p_id in free_p
            ),
        )
        for neg_sim, _, o_id, p_id in scored:
            if -neg_sim < JACCARD_ACCEPT_THRESHOLD:
                break
            if o_id in free_o and p_id in free_p:
                pairs.append((o_id, p_id))
                del free_o[o_id]
                del free_p[p_id]

    return BlockMatching(
        pairs=tuple(sorted(pairs)),
        unmatched_o=frozenset(free_o),
        unmatched_p=frozenset(free_p),
    )


def _edit_script(old: tuple[str, ...], new: tuple[str, ...]) -> tuple[StatementEdit, ...]:
    edits = []
    matcher = difflib.SequenceMatcher(a=old, b=new, autojunk=False)
    for op, o_start, o_end, n_start, n_end in matcher.get_opcodes():
        if op == "equal":
            continue
        edits.append(StatementEdit(op=op, old=old[o_start:o_end], new=new[n_start:n_end]))
    return tuple(edits)


def compute_diff(g_o: ControlFlowGraph, g_p: ControlFlowGraph) -> CfgDiff:
    matching = match_blocks(g_o, g_p)
    p_to_o = {p: o for o, p in matching.pairs}

    def map_p(block_id: int) -> EdgeRef:
        if block_id in p_to_o:
            return EdgeRef("o", p_to_o[block_id])
        return EdgeRef("p", block_id)

    mapped_p_edges = frozenset((map_p(src), map_p(dst)) for src, dst in g_p.edges)
    o_edges = frozenset((EdgeRef("o", src), EdgeRef("o", dst)) for src, dst in g_o.edges)

    content_changes = []
    for o_id, p_id in matching.pairs:
        old = g_o.block(o_id).content_lines()
        new = g_p.block(p_id).content_lines()
        if old != new:
            content_changes.append(ContentChange(o_id, p_id, _edit_script(old, new)))

    return CfgDiff(
        delta_s=BlockChanges(added=matching.unmatched_p, removed=matching.unmatched_o),
        delta_f=EdgeChanges(added=mapped_p_edges - o_edges, removed=o_edges - mapped_p_edges),
        delta_c=tuple(content_changes),
    )


def _summarize(lines: tuple[str, ...]) -> str:
    return " | ".join(lines)


def render_diff(diff: CfgDiff, g_o: ControlFlowGraph | None = None, g_p: ControlFlowGraph | None = None) -> str:
    """Human-readable diff text with one labeled section per component;
    stable ordering, so equal diffs render byte-identically.

    When the graphs are supplied, added/removed block entries include the
    block content to make the text useful in prompts.
    """
    out: list[str] = []

    if diff.delta_s.is_empty():
        out.append("ΔS: none")
    else:
        out.append("ΔS:")
        for block_id in sorted(diff.delta_s.added):
            suffix = ""
            if g_p is not None:
                suffix = f": {_summarize(g_p.block(block_id).content_lines())}"
            out.append(f"  + added block B{block_id}{suffix}")
        for block_id in sorted(diff.delta_s.removed):
            suffix = ""
            if g_o is not None:
                suffix = f": {_summarize(g_o.block(block_id).content_lines())}"
            out.append(f"  - removed block B{block_id}{suffix}")

    if diff.delta_f.is_empty():
        out.append("ΔF: none")
    else:
        out.append("ΔF:")
        for src, dst in sorted(diff.delta_f.added):
            out.append(f"  + edge {src.render()} -> {dst.render()}")
        for src, dst in sorted(diff.delta_f.removed):
            out.append(f"  - edge {src.render()} -> {dst.render()}")

    if not diff.delta_c:
        out.append("ΔC: none")
    else:
        out.append("ΔC:")
        for change in diff.delta_c:
            out.append(f"  block B{change.o_id} -> B{change.p_id}:")
            for edit in change.edits:
                if edit.op == "insert":
                    out.append(f"    insert: {_summarize(edit.new)}")
                elif edit.op == "delete":
                    out.append(f"    delete: {_summarize(edit.old)}")
                else:
                    out.append(f"    replace: {_summarize(edit.old)} -> {_summarize(edit.new)}")

    return "\n".join(out) + "\n"
