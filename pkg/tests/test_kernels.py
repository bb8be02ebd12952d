"""Kernel backends: brute-force oracles plus C/pure parity."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from streamscribe.kernels import _pykernels

try:
    from streamscribe.kernels import _ckernels
except ImportError:
    _ckernels = None

BACKENDS = [_pykernels] + ([_ckernels] if _ckernels is not None else [])


def brute_force_dtw_cost(cost):
    """Enumerate every monotonic path (down/right/diagonal) and return the
    minimal total cell cost."""
    rows, cols = cost.shape
    best = [np.inf]

    def walk(f, n, acc):
        acc += cost[f, n]
        if acc >= best[0]:
            return
        if f == rows - 1 and n == cols - 1:
            best[0] = acc
            return
        if f + 1 < rows and n + 1 < cols:
            walk(f + 1, n + 1, acc)
        if f + 1 < rows:
            walk(f + 1, n, acc)
        if n + 1 < cols:
            walk(f, n + 1, acc)

    walk(0, 0, 0.0)
    return best[0]


def reference_levenshtein(a, b):
    table = np.zeros((len(a) + 1, len(b) + 1), dtype=int)
    table[:, 0] = np.arange(len(a) + 1)
    table[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            table[i, j] = min(
                table[i - 1, j - 1] + (a[i - 1] != b[j - 1]),
                table[i - 1, j] + 1,
                table[i, j - 1] + 1,
            )
    return int(table[len(a), len(b)])


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.BACKEND)
class TestDtwPath:
    def test_single_cell(self, impl):
        fs, ns, total = impl.dtw_path(np.array([[0.7]]))
        assert (fs, ns) == ([0], [0])
        assert total == pytest.approx(0.7)

    def test_cost_matches_brute_force_on_random_matrices(self, impl):
        rng = np.random.default_rng(7)
        for _ in range(200):
            rows = int(rng.integers(1, 7))
            cols = int(rng.integers(1, 7))
            cost = rng.random((rows, cols))
            _, _, total = impl.dtw_path(cost)
            assert total == pytest.approx(brute_force_dtw_cost(cost), abs=1e-9)

    def test_path_is_monotonic_and_connected(self, impl):
        rng = np.random.default_rng(3)
        cost = rng.random((8, 5))
        fs, ns, _ = impl.dtw_path(cost)
        assert (fs[0], ns[0]) == (0, 0)
        assert (fs[-1], ns[-1]) == (7, 4)
        for (f0, n0), (f1, n1) in zip(zip(fs, ns), zip(fs[1:], ns[1:])):
            assert (f1 - f0, n1 - n0) in {(1, 0), (0, 1), (1, 1)}

    def test_tie_prefers_diagonal(self, impl):
        fs, ns, _ = impl.dtw_path(np.zeros((3, 3)))
        assert fs == [0, 1, 2] and ns == [0, 1, 2]

    def test_empty_rejected(self, impl):
        with pytest.raises(ValueError):
            impl.dtw_path(np.zeros((0, 3)))


@pytest.mark.parametrize("impl", BACKENDS, ids=lambda m: m.BACKEND)
class TestLevenshtein:
    def test_identity(self, impl):
        assert impl.levenshtein([1, 2, 3], [1, 2, 3]) == 0

    def test_known_cases(self, impl):
        assert impl.levenshtein([1, 2, 3], [1, 9, 3]) == 1
        assert impl.levenshtein([1, 2, 3, 4], [1, 3, 4]) == 1
        assert impl.levenshtein([], [1, 2]) == 2

    def test_matches_reference_on_random_sequences(self, impl):
        rng = np.random.default_rng(11)
        for _ in range(100):
            a = rng.integers(0, 5, size=rng.integers(0, 12)).tolist()
            b = rng.integers(0, 5, size=rng.integers(0, 12)).tolist()
            assert impl.levenshtein(a, b) == reference_levenshtein(a, b)


@pytest.mark.skipif(_ckernels is None, reason="compiled kernels unavailable")
class TestBackendParity:
    @settings(max_examples=60, deadline=None)
    @given(
        st.integers(min_value=1, max_value=9),
        st.integers(min_value=1, max_value=9),
        st.integers(min_value=0, max_value=2**31),
    )
    def test_dtw_paths_identical(self, rows, cols, seed):
        cost = np.random.default_rng(seed).random((rows, cols))
        assert _pykernels.dtw_path(cost) == _ckernels.dtw_path(cost)

    @settings(max_examples=60, deadline=None)
    @given(
        st.lists(st.integers(min_value=0, max_value=4), max_size=15),
        st.lists(st.integers(min_value=0, max_value=4), max_size=15),
    )
    def test_levenshtein_identical(self, a, b):
        assert _pykernels.levenshtein(a, b) == _ckernels.levenshtein(a, b)
