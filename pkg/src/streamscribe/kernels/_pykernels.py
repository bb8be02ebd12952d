"""Pure-Python kernel implementations (fallback when the C extension is absent).

Semantics must match ``_ckernels`` exactly; the parity test suite compares
both backends cell-for-cell.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

BACKEND = "python"


def dtw_path(cost: np.ndarray) -> tuple[list[int], list[int], float]:
    """Minimal-cost monotonic path through ``cost`` (frames x tokens).

    Moves are down (+1 frame), right (+1 token), and diagonal. Returns the
    visited (frame, token) index lists from (0, 0) to (F-1, N-1) plus the
    path cost (sum of visited cells). Cost ties during backtracking prefer
    diagonal, then down, then right.
    """
    c = np.asarray(cost, dtype=np.float64)
    if c.ndim != 2 or c.size == 0:
        raise ValueError("cost matrix must be non-empty and 2-D")
    rows, cols = c.shape
    d = np.empty((rows, cols), dtype=np.float64)
    d[0, 0] = c[0, 0]
    for f in range(1, rows):
        d[f, 0] = d[f - 1, 0] + c[f, 0]
    for n in range(1, cols):
        d[0, n] = d[0, n - 1] + c[0, n]
    for f in range(1, rows):
        for n in range(1, cols):
            d[f, n] = c[f, n] + min(d[f - 1, n - 1], d[f - 1, n], d[f, n - 1])

    fs = [rows - 1]
    ns = [cols - 1]
    f, n = rows - 1, cols - 1
    while f > 0 or n > 0:
        if f == 0:
            n -= 1
        elif n == 0:
            f -= 1
        else:
            diag, down, right = d[f - 1, n - 1], d[f - 1, n], d[f, n - 1]
            best = min(diag, down, right)
            if diag == best:
                f -= 1
                n -= 1
            elif down == best:
                f -= 1
            else:
                n -= 1
        fs.append(f)
        ns.append(n)
    fs.reverse()
    ns.reverse()
    return fs, ns, float(d[rows - 1, cols - 1])


def levenshtein(a: Sequence[int], b: Sequence[int]) -> int:
    """Edit distance (substitution/deletion/insertion, unit costs) between
    two integer sequences."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    cur = [0] * (len(b) + 1)
    for i in range(1, len(a) + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, len(b) + 1):
            sub = prev[j - 1] + (0 if ai == b[j - 1] else 1)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            cur[j] = min(sub, dele, ins)
        prev, cur = cur, prev
    return prev[len(b)]
