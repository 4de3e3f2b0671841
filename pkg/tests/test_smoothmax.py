import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import optimize, special

from hdclt import smoothmax as S
from hdclt.constants import DEFAULT_C0, DEFAULT_FRAKC


def hull_witnesses(x, prm, frakC):
    """Per-coordinate maximizers of |d_j phi(y)| exp(-kappa ||x-y||), by Nelder-Mead from x."""
    kappa = frakC * S.log_ep(prm.p) / prm.eps
    out = []
    for j in range(x.size):
        f = lambda y: -abs(S.gradient(y, prm)[j]) * math.exp(-kappa * np.abs(x - y).max())
        res = optimize.minimize(f, x, method="Nelder-Mead", options=dict(xatol=1e-10, fatol=1e-14, maxiter=20_000))
        out.append((j, res.x))
    return out


def test_f_beta_example_and_stability():
    assert S.f_beta([0.0, 1.0], 1.0) == pytest.approx(math.log(1 + math.e), rel=1e-14)
    assert S.f_beta([1000.0, 1000.0], 50.0) == pytest.approx(1000.0 + math.log(2) / 50.0)


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=40), st.floats(0.01, 100.0))
def test_f_beta_bracket(z, beta):
    v = float(S.f_beta(z, beta))
    assert max(z) <= v <= max(z) + math.log(len(z)) / beta + 1e-12 * (1 + abs(max(z)))


def test_f_beta_bracket_bulk():
    g = np.random.default_rng(0)
    z = g.normal(scale=3.0, size=(100_000, 8))
    beta = g.uniform(0.1, 50.0, size=100_000)
    v = S.f_beta(z, beta)
    m = z.max(axis=1)
    assert np.all(v >= m) and np.all(v <= m + np.log(8) / beta)


def test_g0_values():
    assert S.g0(0.0) == 1.0 and S.g0(1.0) == 0.0 and S.g0(0.5) == 0.5
    assert S.g0(-3.0) == 1.0 and S.g0(7.0) == 0.0
    assert S.g0_prime(0.5) == -1.875
    assert S.G1_SUP == 1.875


def test_phi_direct_value():
    prm = S.SmoothMaxParams(1.0, 0.5, 1)
    beta = 4.0 * math.log(2.0)
    F = special.logsumexp([beta * 0.25, -beta * 2.25]) / beta
    t = 2 * (F - 0.25) / 0.5
    want = 1 - 10 * t**3 + 15 * t**4 - 6 * t**5
    got = float(S.phi_r_eps([1.25], prm))
    assert 0.0 < got < 1.0
    assert got == pytest.approx(want, rel=1e-13)


def test_sandwich_bulk():
    g = np.random.default_rng(1)
    k = 100_000
    for p in (1, 4, 16):
        r = g.uniform(0.0, 3.0, size=k)
        eps = g.uniform(0.01, 1.0, size=k)
        x = g.uniform(-4.0, 4.0, size=(k, p))
        nrm = np.abs(x).max(axis=1)
        # evaluate with per-row parameters
        beta = 2.0 * math.log(2.0 * p) / eps
        F = S.f_beta(S._zx(x) - r[:, None], beta)
        phi = S.g0(2.0 * (F - eps / 2.0) / eps)
        assert np.all(phi[nrm <= r] == 1.0)
        assert np.all(phi[nrm > r + eps] == 0.0)
        assert np.all((phi >= 0.0) & (phi <= 1.0))


def test_params_validation():
    with pytest.raises(ValueError):
        S.SmoothMaxParams(1.0, 0.0, 2)
    with pytest.raises(ValueError):
        S.SmoothMaxParams(1.0, 0.5, 0)
    assert S.SmoothMaxParams(1.0, 0.5, 4).beta == pytest.approx(2 * math.log(8) / 0.5)


@pytest.mark.parametrize("p", [1, 4, 16])
def test_gradient_matches_central_difference(p):
    prm = S.SmoothMaxParams(1.0, 0.5, p)
    g = np.random.default_rng(p)
    x = S._band_points(prm, g, 400)
    h = 1e-6 * prm.eps
    checked = 0
    for xi in x:
        t = float(S._t(xi, prm))
        if not 0.01 < t < 0.99:
            continue  # seams of g0
        an = S.gradient(xi, prm)
        fd = np.array([(S.phi_r_eps(xi + h * e, prm) - S.phi_r_eps(xi - h * e, prm)) / (2 * h) for e in np.eye(p)])
        err = np.abs(an - fd).sum() / np.abs(an).sum()
        assert err <= 1e-5
        checked += 1
    assert checked > 20


def test_envelope_dominates_gradient():
    prm = S.SmoothMaxParams(1.0, 0.5, 8)
    x = S._band_points(prm, np.random.default_rng(3), 2000)
    assert np.all(S.envelope(x, prm) >= np.abs(S.gradient(x, prm)))
    assert np.allclose(S.envelope(x, prm).sum(axis=1), 3.75 / prm.eps)


def test_analytic_bounds_and_defaults():
    for p in (1, 4, 16, 64, 256):
        assert S.provable_C0(p) <= DEFAULT_C0
        assert S.stability_frakC(p) <= DEFAULT_FRAKC
    assert S.analytic_sum_bounds(1)["d1"] == 3.75


@pytest.mark.parametrize("p", [1, 16])
def test_default_derivative_certification_passes(p):
    cert = S.certify_derivative_bounds(S.SmoothMaxParams(1.0, 0.5, p), samples=200, seed=1)
    assert cert.passed
    assert cert.max_ratio["d1"] <= 3.75 / DEFAULT_C0 + 1e-12


def test_derivative_certification_fails_at_small_C0():
    cert = S.certify_derivative_bounds(S.SmoothMaxParams(1.0, 0.5, 4), C0=5.0, samples=200, seed=1)
    assert not cert.passed


def test_default_stability_certification_passes():
    cert = S.certify_stability(S.SmoothMaxParams(1.0, 0.5, 4), pairs=10_000)
    assert cert.passed and len(cert.rows) + cert.skipped == 10_000
    assert cert.max_ratio["frakC_needed"] <= cert.max_ratio["frakC_provable"] + 1e-9


def test_stability_certification_reports_failure_at_frakC_one():
    cert = S.certify_stability(S.SmoothMaxParams(1.0, 0.5, 4), frakC=1.0, pairs=2000)
    assert not cert.passed
    assert cert.to_csv().splitlines()[0] == ",".join(S.CERT_HEADER)


def test_no_envelope_reaches_C0_five_at_frakC_one():
    prm = S.SmoothMaxParams(1.0, 0.5, 4)
    x = 1.2 * np.ones(4)
    lb = S.envelope_hull_lower_bound(x, prm, 1.0, hull_witnesses(x, prm, 1.0))
    # eps * sum_j D_j(x) must stay below C0; every stable envelope exceeds 5
    assert prm.eps * lb > 5.0
