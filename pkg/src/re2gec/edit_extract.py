"""Minimal edit scripts between a source sentence and a corrected target.

Alignment runs over segmenter tokens: longest-common-subsequence with a
canonical tie-break (always match equal tokens at the earliest positions;
when skipping, consume the source side first), so the same input always
yields the same script.  Matched tokens anchor the alignment; the character
gaps between consecutive matched tokens become edits, after trimming any
characters the gap shares on both sides (this keeps unchanged separators out
of edit spans in whitespace mode).  A maximal run of adjacent non-equal
alignment ops therefore collapses into a single Edit.

Offsets are 0-based Unicode character offsets into the source sentence, and
``apply_edits(source, extract_edits(source, target, cfg)) == target`` holds
for every segmenter mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .corpus import Edit
from .errors import EditError
from .segmentation import SegmenterConfig, Token, segment

_CHAR_CONFIG = SegmenterConfig(mode="character")


@dataclass(frozen=True)
class AlignmentOp:
    """One aligned region: token index ranges into the source and target sequences."""

    kind: str  # "equal" | "replace" | "delete" | "insert"
    source_range: tuple[int, int]
    target_range: tuple[int, int]


def _lcs_pairs(a: Sequence[str], b: Sequence[str]) -> list[tuple[int, int]]:
    """Matched index pairs of one LCS, canonical under the greedy tie-break."""
    la, lb = len(a), len(b)
    # L[i][j] = LCS length of a[i:], b[j:]
    length = [[0] * (lb + 1) for _ in range(la + 1)]
    for i in range(la - 1, -1, -1):
        row, nxt = length[i], length[i + 1]
        ai = a[i]
        for j in range(lb - 1, -1, -1):
            if ai == b[j]:
                row[j] = nxt[j + 1] + 1
            else:
                x, y = nxt[j], row[j + 1]
                row[j] = x if x >= y else y
    pairs = []
    i = j = 0
    while i < la and j < lb:
        if a[i] == b[j]:
            # Matching equal heads is always LCS-optimal.
            pairs.append((i, j))
            i += 1
            j += 1
        elif length[i + 1][j] >= length[i][j + 1]:
            i += 1
        else:
            j += 1
    return pairs


def _match_pairs(a: Sequence[str], b: Sequence[str]) -> list[tuple[int, int]]:
    """LCS match pairs with common prefix/suffix pinned before the DP runs."""
    la, lb = len(a), len(b)
    pre = 0
    while pre < la and pre < lb and a[pre] == b[pre]:
        pre += 1
    suf = 0
    while suf < la - pre and suf < lb - pre and a[la - 1 - suf] == b[lb - 1 - suf]:
        suf += 1
    pairs = [(i, i) for i in range(pre)]
    mid_a, mid_b = a[pre : la - suf], b[pre : lb - suf]
    if mid_a and mid_b:
        pairs.extend((pre + i, pre + j) for i, j in _lcs_pairs(mid_a, mid_b))
    pairs.extend((la - suf + n, lb - suf + n) for n in range(suf))
    return pairs


def align_tokens(
    source_tokens: Sequence[Token], target_tokens: Sequence[Token]
) -> list[AlignmentOp]:
    """Alignment ops partitioning both token sequences in order."""
    pairs = _match_pairs([t.text for t in source_tokens], [t.text for t in target_tokens])
    ops = []
    prev_i = prev_j = 0

    def flush_gap(i: int, j: int) -> None:
        if i > prev_i and j > prev_j:
            kind = "replace"
        elif i > prev_i:
            kind = "delete"
        elif j > prev_j:
            kind = "insert"
        else:
            return
        ops.append(AlignmentOp(kind, (prev_i, i), (prev_j, j)))

    pos = 0
    while pos < len(pairs):
        i0, j0 = pairs[pos]
        run = 1
        while (
            pos + run < len(pairs)
            and pairs[pos + run] == (i0 + run, j0 + run)
        ):
            run += 1
        flush_gap(i0, j0)
        ops.append(AlignmentOp("equal", (i0, i0 + run), (j0, j0 + run)))
        prev_i, prev_j = i0 + run, j0 + run
        pos += run
    flush_gap(len(source_tokens), len(target_tokens))
    return ops


def _trim_gap(gap_s: str, gap_t: str) -> tuple[int, str, str]:
    """Drop characters the gap shares on both ends; returns (prefix_len, orig, repl)."""
    p = 0
    limit = min(len(gap_s), len(gap_t))
    while p < limit and gap_s[p] == gap_t[p]:
        p += 1
    q = 0
    limit = min(len(gap_s), len(gap_t)) - p
    while q < limit and gap_s[len(gap_s) - 1 - q] == gap_t[len(gap_t) - 1 - q]:
        q += 1
    return p, gap_s[p : len(gap_s) - q], gap_t[p : len(gap_t) - q]


def _edits_from_alignment(
    source: str,
    target: str,
    pairs: list[tuple[int, int]],
    s_spans: Sequence[tuple[int, int]],
    t_spans: Sequence[tuple[int, int]],
) -> list[Edit]:
    edits = []
    prev_s = prev_t = 0
    anchors = [(s_spans[i], t_spans[j]) for i, j in pairs]
    anchors.append(((len(source), len(source)), (len(target), len(target))))
    for (s_start, s_end), (t_start, t_end) in anchors:
        gap_s = source[prev_s:s_start]
        gap_t = target[prev_t:t_start]
        if gap_s != gap_t:
            p, orig, repl = _trim_gap(gap_s, gap_t)
            edits.append(Edit(prev_s + p, orig, repl))
        prev_s, prev_t = s_end, t_end
    return edits


def extract_edits(source: str, target: str, config: SegmenterConfig) -> list[Edit]:
    """Extract the canonical minimal edit script turning source into target.

    Returns edits sorted ascending by offset with pairwise non-overlapping
    source spans; empty iff source == target.
    """
    if source == target:
        return []
    source_tokens = segment(source, config)
    target_tokens = segment(target, config)
    pairs = _match_pairs(
        [t.text for t in source_tokens], [t.text for t in target_tokens]
    )
    return _edits_from_alignment(
        source,
        target,
        pairs,
        [(t.start, t.end) for t in source_tokens],
        [(t.start, t.end) for t in target_tokens],
    )


def char_level_edits(source: str, target: str) -> list[Edit]:
    """Edit script under forced character segmentation, whatever config a caller uses elsewhere."""
    if source == target:
        return []
    spans_s = [(i, i + 1) for i in range(len(source))]
    spans_t = [(i, i + 1) for i in range(len(target))]
    pairs = _match_pairs(source, target)
    return _edits_from_alignment(source, target, pairs, spans_s, spans_t)


def apply_edits(source: str, edits: Sequence[Edit]) -> str:
    """Apply a sorted, non-overlapping edit script by right-to-left span substitution."""
    prev_end = 0
    for e in edits:
        if e.offset < prev_end:
            raise EditError(f"edits overlap or are unsorted at offset {e.offset}")
        end = e.offset + len(e.original)
        if end > len(source):
            raise EditError(
                f"edit out of range: offset {e.offset} + {len(e.original)} > {len(source)}"
            )
        if source[e.offset : end] != e.original:
            raise EditError(
                f"edit original mismatch at offset {e.offset}: "
                f"expected {e.original!r}, found {source[e.offset:end]!r}"
            )
        prev_end = end
    result = source
    for e in reversed(edits):
        end = e.offset + len(e.original)
        result = result[: e.offset] + e.replacement + result[end:]
    return result
