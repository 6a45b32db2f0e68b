"""Ordering-manipulation metrics over committed traces.

The reordered-command ratio is a Kendall-tau style statistic: over all
pairs of commands from the same proposer, the fraction committed against
their proposal order. Inversions are counted per proposer with a
merge-sort pass; tests cross-check against a quadratic counter.
"""

from __future__ import annotations

from .executor import TraceEntry


def count_inversions(values: list[int]) -> int:
    """Number of index pairs (i, j) with i < j and values[i] > values[j]."""
    if len(values) < 2:
        return 0
    work = list(values)
    buffer = [0] * len(work)
    return _merge_count(work, buffer, 0, len(work))


def _merge_count(work: list[int], buffer: list[int], lo: int, hi: int) -> int:
    if hi - lo < 2:
        return 0
    mid = (lo + hi) // 2
    count = _merge_count(work, buffer, lo, mid) + _merge_count(work, buffer, mid, hi)
    i, j, k = lo, mid, lo
    while i < mid and j < hi:
        if work[i] <= work[j]:
            buffer[k] = work[i]
            i += 1
        else:
            buffer[k] = work[j]
            count += mid - i
            j += 1
        k += 1
    buffer[k:hi] = work[i:mid] if i < mid else work[j:hi]
    work[lo:hi] = buffer[lo:hi]
    return count


def per_proposer_sequences(trace: list[TraceEntry]) -> dict[int, list[int]]:
    """Proposer sequence numbers in committed order, grouped by proposer."""
    out: dict[int, list[int]] = {}
    for entry in trace:
        out.setdefault(entry.proposer_id, []).append(entry.proposer_seq)
    return out


def reordered_ratio(trace: list[TraceEntry]) -> float:
    """Inverted same-proposer pairs / all same-proposer pairs (0.0 if none)."""
    inversions = 0
    pairs = 0
    for seqs in per_proposer_sequences(trace).values():
        k = len(seqs)
        pairs += k * (k - 1) // 2
        inversions += count_inversions(seqs)
    if pairs == 0:
        return 0.0
    return inversions / pairs


def traces_consistent(traces: list[list[TraceEntry]]) -> bool:
    """True iff every trace commits the identical digest sequence."""
    if not traces:
        return True
    reference = [entry.digest for entry in traces[0]]
    return all([entry.digest for entry in trace] == reference for trace in traces[1:])


def first_divergence(a: list[bytes], b: list[bytes]) -> int | None:
    """Index of the first differing position, or None when identical."""
    for idx, (x, y) in enumerate(zip(a, b)):
        if x != y:
            return idx
    if len(a) != len(b):
        return min(len(a), len(b))
    return None
