"""Pure-Python reference kernels. Tool names are pre-encoded as small ints."""
from __future__ import annotations

from collections import Counter


def occurrences(path, window) -> list[int]:
    n, k = len(path), len(window)
    if k == 0:
        return []
    first = window[0]
    hits = []
    for start in range(n - k + 1):
        if path[start] != first:
            continue
        for j in range(1, k):
            if path[start + j] != window[j]:
                break
        else:
            hits.append(start)
    return hits


def successor_hits(paths, window) -> list[tuple[int, int]]:
    """(position in ``paths``, successor id) for every occurrence that has a successor."""
    k = len(window)
    out = []
    for pos, path in enumerate(paths):
        last = len(path) - k
        for start in occurrences(path, window):
            if start < last:
                out.append((pos, path[start + k]))
    return out


def ngram_counts(sequences, order: int, skip: int) -> dict[tuple, int]:
    """Count (context..., next) tuples for every position t >= skip of each sequence."""
    counts: Counter = Counter()
    for seq in sequences:
        n = len(seq)
        seq = list(seq)
        for t in range(skip, n):
            counts[tuple(seq[t - order:t + 1])] += 1
    return dict(counts)
