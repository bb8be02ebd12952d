# cython: language_level=3
"""Compiled kernels: DTW path search and integer-sequence edit distance.

Must stay semantically identical to ``_pykernels``; the parity tests compare
both backends on random inputs.
"""

import numpy as np

BACKEND = "c"


def dtw_path(cost):
    """Minimal-cost monotonic path through ``cost`` (frames x tokens)."""
    c_arr = np.ascontiguousarray(cost, dtype=np.float64)
    if c_arr.ndim != 2 or c_arr.size == 0:
        raise ValueError("cost matrix must be non-empty and 2-D")

    cdef double[:, :] c = c_arr
    cdef Py_ssize_t rows = c.shape[0]
    cdef Py_ssize_t cols = c.shape[1]

    d_arr = np.empty((rows, cols), dtype=np.float64)
    cdef double[:, :] d = d_arr
    cdef Py_ssize_t f, n
    cdef double diag, down, right, best

    d[0, 0] = c[0, 0]
    for f in range(1, rows):
        d[f, 0] = d[f - 1, 0] + c[f, 0]
    for n in range(1, cols):
        d[0, n] = d[0, n - 1] + c[0, n]
    for f in range(1, rows):
        for n in range(1, cols):
            best = d[f - 1, n - 1]
            if d[f - 1, n] < best:
                best = d[f - 1, n]
            if d[f, n - 1] < best:
                best = d[f, n - 1]
            d[f, n] = c[f, n] + best

    fs = [rows - 1]
    ns = [cols - 1]
    f = rows - 1
    n = cols - 1
    while f > 0 or n > 0:
        if f == 0:
            n -= 1
        elif n == 0:
            f -= 1
        else:
            diag = d[f - 1, n - 1]
            down = d[f - 1, n]
            right = d[f, n - 1]
            best = diag
            if down < best:
                best = down
            if right < best:
                best = right
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


def levenshtein(a, b):
    """Edit distance (substitution/deletion/insertion, unit costs)."""
    a_arr = np.ascontiguousarray(a, dtype=np.int64)
    b_arr = np.ascontiguousarray(b, dtype=np.int64)
    if a_arr.shape[0] < b_arr.shape[0]:
        a_arr, b_arr = b_arr, a_arr

    cdef long long[:] av = a_arr
    cdef long long[:] bv = b_arr
    cdef Py_ssize_t la = av.shape[0]
    cdef Py_ssize_t lb = bv.shape[0]

    prev_arr = np.arange(lb + 1, dtype=np.int64)
    cur_arr = np.zeros(lb + 1, dtype=np.int64)
    cdef long long[:] prev = prev_arr
    cdef long long[:] cur = cur_arr
    cdef long long[:] tmp
    cdef Py_ssize_t i, j
    cdef long long ai, sub, dele, ins, val

    for i in range(1, la + 1):
        cur[0] = i
        ai = av[i - 1]
        for j in range(1, lb + 1):
            sub = prev[j - 1] + (0 if ai == bv[j - 1] else 1)
            dele = prev[j] + 1
            ins = cur[j - 1] + 1
            val = sub
            if dele < val:
                val = dele
            if ins < val:
                val = ins
            cur[j] = val
        tmp = prev
        prev = cur
        cur = tmp
    return int(prev[lb])
