import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdclt import _kernels as K
from hdclt import rng


def test_stream_is_reproducible_and_key_sensitive():
    a = rng.stream(3, "exp", 1).standard_normal(5)
    b = rng.stream(3, "exp", 1).standard_normal(5)
    c = rng.stream(3, "exp", 2).standard_normal(5)
    d = rng.stream(4, "exp", 1).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)


def test_block_sizes_cover_total():
    assert rng.block_sizes(0) == []
    assert rng.block_sizes(10, 4) == [4, 4, 2]
    assert sum(rng.block_sizes(100_001)) == 100_001


@pytest.mark.parametrize("workers", [1, 3, 8])
def test_concat_blocks_independent_of_workers(workers):
    fn = lambda g, k: g.standard_normal((k, 3))
    ref = rng.concat_blocks(fn, 20_000, 11, "w", workers=1)
    out = rng.concat_blocks(fn, 20_000, 11, "w", workers=workers)
    assert np.array_equal(ref, out)


def test_rowmax_abs_paths_agree():
    a = np.random.default_rng(0).standard_normal((500, 7))
    assert np.array_equal(K.rowmax_abs_numpy(a), K.rowmax_abs_numba(a))
    assert np.array_equal(K.rowmax_abs(a), np.abs(a).max(axis=1))


@pytest.mark.parametrize("m", [0.0, 1.0, 2.5])
def test_ecdf_two_sample_paths_agree(m):
    g = np.random.default_rng(1)
    x = np.sort(np.abs(g.standard_normal(3000)))
    y = np.sort(np.abs(g.standard_normal(2000)) * 1.1)
    a = K.ecdf_sup_two_sample_numpy(x, y, m)
    b = K.ecdf_sup_two_sample_numba(x, y, m)
    assert a[0] == pytest.approx(b[0], rel=1e-14)
    assert a[1] == b[1]


def test_ecdf_two_sample_matches_scipy_ks():
    from scipy import stats

    g = np.random.default_rng(2)
    x = np.sort(g.standard_normal(700))
    y = np.sort(g.standard_normal(900) + 0.1)
    assert K.ecdf_sup_two_sample(x, y, 0.0)[0] == pytest.approx(stats.ks_2samp(x, y).statistic, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 64), st.integers(0, 2**32 - 1))
def test_halfline_prefix_sum_equals_brute_force(n, seed):
    g = np.random.default_rng(seed)
    x = g.random((4, n))
    xi = g.standard_normal((4, n))
    assert np.array_equal(K.halfline_sup(x, xi), K.halfline_sup_brute(x, xi))
    assert np.array_equal(K.halfline_sup_numpy(x, xi), K.halfline_sup_numba(x, xi))


def test_halfline_with_ties():
    x = np.array([[0.5, 0.5, 0.2, 0.9]])
    xi = np.array([[1.0, 2.0, -4.0, 0.5]])
    # cut sets: {}, {x=.9}, {.9,.5,.5}, all -> sums 0, .5, 3.5, -.5
    assert K.halfline_sup_brute(x, xi)[0] == 3.5
    assert K.halfline_sup(x, xi)[0] == 3.5


def test_halfline_tied_points_move_together():
    x = np.array([[0.5, 0.5]])
    xi = np.array([[5.0, -5.0]])
    assert K.halfline_sup_brute(x, xi)[0] == 0.0
    assert K.halfline_sup_numpy(x, xi)[0] == 0.0
    assert K.halfline_sup_numba(x, xi)[0] == 0.0
