import math

import numpy as np
import pytest

from hdclt import empproc as E
from hdclt import rng
from hdclt._kernels import halfline_sup, halfline_sup_brute

SQRT_2_PI = math.sqrt(2.0 / math.pi)


def test_zero_multipliers():
    assert E.estimate_Zn(32, "zero", reps=100) == (0.0, 0.0)
    assert E.gaussian_width_bound(32, sigma_fn=lambda x: np.zeros_like(x), reps=100) == (0.0, 0.0)


def test_single_point_class():
    z, se = E.estimate_Zn(1, "normal", reps=100_000, seed=1)
    assert abs(z - SQRT_2_PI) <= 4 * se
    w, se = E.gaussian_width_bound(1, reps=100_000, seed=2)
    assert abs(w - SQRT_2_PI) <= 4 * se


def test_student_multipliers_have_unit_variance():
    x = E._xi("student_t3", rng.stream(0, "t3"), 2_000_000)
    assert x.var() == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ValueError, match="xi_dist"):
        E._xi("cauchy", rng.stream(0, "t3"), 3)


def test_zn_trend_and_brownian_limit():
    z = {n: E.estimate_Zn(n, "normal", reps=10_000, seed=3) for n in (16, 256, 4096)}
    for a, b in ((16, 256), (256, 4096)):
        assert z[b][0] >= z[a][0] - 3 * math.hypot(z[a][1], z[b][1])
    # the partial-sum process tends to Brownian motion: E sup |B| = sqrt(pi/2)
    assert abs(z[4096][0] - math.sqrt(math.pi / 2)) <= 0.02


@pytest.mark.parametrize("xi", ["normal", "student_t3"])
@pytest.mark.parametrize("n", [16, 256])
def test_width_dominates_zn(n, xi):
    z, se_z = E.estimate_Zn(n, xi, reps=10_000, seed=4)
    w, se_w = E.gaussian_width_bound(n, reps=10_000, seed=5)
    assert w >= z - 3 * math.hypot(se_z, se_w)


def test_exact_sup_matches_brute_force():
    g = rng.stream(0, "brute")
    for n in (1, 2, 7, 33, 64):
        x = g.random((1000, n))
        xi = g.standard_normal((1000, n))
        assert np.array_equal(halfline_sup(x, xi), halfline_sup_brute(x, xi))


def test_entropy_invariant():
    spec = E.FunctionClassSpec()
    assert spec.traces(np.array([0.1, 0.1, 0.5])) == 3
    for n in (1, 16, 256):
        assert E.entropy_audit(n, reps=200, seed=n, spec=spec)


def test_spec_validation():
    with pytest.raises(ValueError):
        E.FunctionClassSpec(kind="boxes")
    with pytest.raises(ValueError):
        E.FunctionClassSpec(vc_dim=2)


def test_worker_independence():
    a = E.sample_Zn(64, reps=20_000, seed=6, workers=1)
    b = E.sample_Zn(64, reps=20_000, seed=6, workers=5)
    assert np.array_equal(a, b)
