import json
import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hdclt import constants as K

PI = math.pi


def pm(L=1.0, Lbar=1.0, M=0.0, nu=1.0):
    return {"L_n": L, "Lbar_n0": Lbar, "Lbar_nm": lambda m: Lbar, "M_n": lambda phi: M, "nu": lambda q: nu,
            "L_q": lambda q: L}


# ---------------------------------------------------------------- Gaussian-max constants

def test_phi2_phi4_K_examples():
    assert K.phi2_value(1, 1, 1) == pytest.approx(max(51 * 5.1, 32 * PI * 3.6**2), rel=1e-14)
    assert K.phi2_value(1, 1, 1) == pytest.approx(1302.8813, abs=1e-4)
    assert K.phi4_value(1, 1, 1) == pytest.approx(1 + 714 + 32 * PI * 12.96 * 45, rel=1e-14)
    assert K.phi4_value(1, 1, 1) == pytest.approx(59344.6587, abs=1e-4)
    assert K.K_lambda(0.0, 1.0) == pytest.approx(5.2, rel=1e-15)
    b = K.anticonc_constants(1, 1, 1)
    assert b.K_of(0.0) == pytest.approx(5.2) and b.phi0 == 1 / 6 and b.phi3 == 20.0


def test_phi_ac_branch_arithmetic():
    br = K.phi_ac_branches(0, 1.0, 1.0, 1.0)
    assert br["small_r"] == pytest.approx(9.0, rel=1e-15)
    # large-r branch: sup over r > 6 of (r+1) e^{-r^2/18}; decreasing there, so r = 6
    expect = 2 * K.phi2_value(1, 1, 1) * math.exp(-9 * 4 / 32) * 7 * math.exp(-36 / 18)
    assert br["large_r_argmax"] == 6.0
    assert br["large_r"] == pytest.approx(expect, rel=1e-13)


@pytest.mark.parametrize("m", [0, 1, 2])
def test_phi_ac_nonincreasing_in_sigma_min(m):
    vals = [K.anticonc_constants(1.0, s, 1.0, [m]).phi_ac[m] for s in (0.25, 0.5, 0.75, 1.0)]
    assert all(a >= b for a, b in zip(vals, vals[1:]))


def test_phi_ac_formula_policy():
    b = K.anticonc_constants(1.0, 1.0, 1.0, [0, 1], theta_policy="formula", theta_m={0: 2.0, 1: 1.0})
    assert b.phi_ac[0] == pytest.approx(2.0 * (2 + 4))
    assert b.phi_ac[1] == pytest.approx(4 + 4)


def test_anticonc_errors():
    with pytest.raises(ValueError, match="sigma_min must be positive"):
        K.anticonc_constants(1, 0, 1)
    with pytest.raises(ValueError):
        K.anticonc_constants(1, 2, 1)
    with pytest.raises(ValueError):
        K.anticonc_constants(1, 1, 1, theta_policy="guess")


# ---------------------------------------------------------------- rate bundles

def test_t31_example():
    b = K.rate_uniform_t31(pm(), p=1, n=64, C0=1.0, frakC=0.0)
    eps = 2 ** (1 / 3) / 2
    assert b.details["eps_n"] == pytest.approx(eps, rel=1e-15)
    assert b.term("anticoncentration") == pytest.approx(4 * eps, rel=1e-15)
    assert b.term("truncated_second") == 0.0
    assert b.term("weighted_third") == pytest.approx(2 ** (-1 / 3) / 4, rel=1e-14)
    assert b.total == pytest.approx(2.71827, abs=1e-5)
    assert b.vacuous


def test_t31_rejects_degenerate_L():
    with pytest.raises(ValueError, match="degenerate"):
        K.rate_uniform_t31(pm(L=0.0), p=1, n=64)


def test_finite_moment_exponents():
    assert K.rate_finite_moment(pm(), 4, 100, tau=1.5).details["n_exponent"] == pytest.approx(1 / 6)
    assert K.rate_finite_moment(pm(), 4, 100, tau=1.0).details["n_exponent"] == pytest.approx(1 / 8)
    assert K.rate_finite_moment(pm(), 4, 100, tau=0.5).theorem == "APPA"
    with pytest.raises(ValueError):
        K.rate_finite_moment(pm(), 4, 100, tau=1.0, m=1)


def test_p32_example():
    b = K.rate_prop32(1.0, p=1, n=64, C0=1.0)
    assert b.total == 4.0 + 2.0**-63
    assert b.term("geometric") == 2.0**-63


def test_t33_example_and_tau_guard():
    b = K.rate_optimal_t33(pm(), p=1, n=64, tau=1.0)
    assert b.term("main") == pytest.approx(0.5, rel=1e-14)
    # at tau = 1 the moment term decays at the same n^{-1/6} rate
    b2 = K.rate_optimal_t33(pm(), p=1, n=64 * 2**6, tau=1.0)
    assert b2.term("moment") / b.term("moment") == pytest.approx(0.5, rel=1e-12)
    with pytest.raises(ValueError, match="tau"):
        K.rate_optimal_t33(pm(), 1, 64, tau=0.5)


def test_t34_terms():
    b = K.rate_nonuniform_t34(pm(), p=1, n=64, m=1, r_nm=1.0, tail_sup=0.0, C0=1.0, frakC=0.0)
    eps = 2 ** (1 / 3) / 2
    assert b.term("anticoncentration0") == pytest.approx(2 ** (13 / 3) * eps**2, rel=1e-14)
    assert b.term("anticoncentration_m") == pytest.approx((2 ** (5 / 3) + 2) * eps, rel=1e-14)
    assert b.term("truncated_second") == 0.0
    assert b.term("weighted_third") == pytest.approx(0.5 / 64, rel=1e-13)
    assert b.term("tail") == 0.0
    with pytest.raises(ValueError, match="tail_sup"):
        K.rate_nonuniform_t34(pm(), 1, 64, 1, 1.0)


def test_t35_example_and_message():
    b = K.rate_nonuniform_t35(pm(), p=1, n=2**12, m=1, tau=1.0, C0=1.0, frakC=0.0)
    e1 = 2 ** (3.5 / 3) / 4
    e2 = 2 ** (5.5 / 3) / 4
    assert b.details["eps_branch_third"] == pytest.approx(e1, rel=1e-14)
    assert b.details["eps_branch_moment"] == pytest.approx(e2, rel=1e-14)
    assert b.total == pytest.approx(16 * e2 + 2.4 * e2, rel=1e-13)
    with pytest.raises(ValueError, match="Fix m >= 1 and tau >= m"):
        K.rate_nonuniform_t35(pm(), 1, 64, m=2, tau=1.0)


def test_subweibull_c36b_example():
    b = K.rate_subweibull("C36b", 1.0, 1.0, pm(), p=1, n=64)
    assert b.term("main") == pytest.approx((1.0) ** (1 / 3) / 2, rel=1e-14)
    assert b.term("tail") == pytest.approx(math.log(64) / 8, rel=1e-14)


def test_subweibull_guards():
    with pytest.raises(K.GuardError, match="alpha log"):
        K.rate_subweibull("C36b", 1.0, 1.0, pm(), p=1, n=8)
    with pytest.raises(K.GuardError):
        K.rate_subweibull("C37a", 1.0, 1.0, pm(), p=1, n=10**6)
    with pytest.raises(ValueError):
        K.rate_subweibull("C36b", 1.0, 1.0, pm(), p=1, n=64, m=1)


def test_simplified_heavy_tail_vanishes_for_alpha_above_one():
    assert K.rate_subweibull_simplified(1.5, 1.0, 4, 100).term("heavy_tail") == 0.0
    assert K.rate_subweibull_simplified(0.5, 1.0, 4, 100).term("heavy_tail") > 0.0


def test_moment_diff_example():
    assert K.moment_diff_bound(1, 1.0, 1.0, 1.0, p=1, n=64) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(ValueError, match="mu > 1"):
        K.rate_moment_diff(1, "paper-default", 1.0, 1.0, 1, 64)
    assert K.rate_moment_diff(1, "paper-default", math.e, 1.0, 1, 64).inputs_echo["beta"] == pytest.approx(1.0)


@pytest.mark.parametrize("make", [
    lambda: K.rate_uniform_t31(pm(M=0.01), 16, 1000),
    lambda: K.rate_finite_moment(pm(), 16, 1000, tau=0.5),
    lambda: K.rate_prop32(2.5, 16, 1000),
    lambda: K.rate_optimal_t33(pm(), 16, 1000, tau=2.0),
    lambda: K.rate_nonuniform_t34(pm(), 16, 1000, m=2, r_nm=3.0, tail_sup=0.01),
    lambda: K.rate_nonuniform_t35(pm(), 16, 1000, m=1, tau=2.0),
    lambda: K.rate_subweibull("C37c", 1.0, 1.0, pm(), 16, 10**5, m=1),
    lambda: K.rate_moment_diff(2, 0.5, 2.0, 1.3, 16, 1000),
    lambda: K.cramer_constants(1.0, 1.0, 1.0, 1, 4, C0=1.0, frakC=0.0, bundle=K.anticonc_constants(1, 1, 1)),
    lambda: K.rate_cramer_c52(1.0, 1.5, (1.0, 1.0), 2.0, 4, 1000, 1.0),
])
def test_recompute_is_bit_exact(make):
    b = make()
    assert K.recompute(json.loads(b.to_json())) == b.total
    assert K.recompute(b) == b.total


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10**4), st.integers(1, 10**6), st.floats(0.1, 10.0))
def test_t33_monotone(p, n, L):
    b = K.rate_optimal_t33(pm(L=L, nu=1.0), p, n, tau=1.0)
    assert K.rate_optimal_t33(pm(L=L, nu=1.0), p, n + 1, tau=1.0).total <= b.total
    assert K.rate_optimal_t33(pm(L=L * 1.5, nu=1.0), p, n, tau=1.0).total >= b.total
    assert K.rate_optimal_t33(pm(L=L, nu=2.0), p, n, tau=1.0).total >= b.total


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 10**4), st.integers(1, 10**6), st.floats(0.01, 100.0))
def test_p32_monotone(p, n, nu3):
    b = K.rate_prop32(nu3, p, n).total
    assert K.rate_prop32(nu3, p, n + 1).total <= b
    assert K.rate_prop32(nu3 * 1.1, p, n).total >= b
    assert K.rate_prop32(nu3, p + 1, n).total >= b


# ---------------------------------------------------------------- Cramer audit

def _bundle11():
    return K.anticonc_constants(1, 1, 1)


def test_cramer_record_invariants():
    for n in (4, 100, 10**6):
        for H in (0.5, 1.0, 3.0):
            b = K.cramer_constants(H, 1.0, 1.0, 4, n, bundle=_bundle11())
            rec = b.details
            assert rec["Pi"] >= rec["Pi_tilde"]
            assert rec["M"] >= 2 * rec["Pi"]
            bs = [K.frakB_s(rec, s, 1.0, n) for s in (0, 0.5, 1, 2, 5)]
            assert bs[0] == rec["B0"]
            assert all(a >= c for a, c in zip(bs, bs[1:]))


def test_cramer_hand_audit():
    b = _bundle11()
    phi2, phi4, a = b.phi2, b.phi4, b.phi_ac[0]
    rec = K.cramer_constants(1.0, 1.0, 1.0, 1, 4, C0=1.0, frakC=0.0, bundle=b).details
    # p = 1 so log(ep) = 1; C2 = C3 = 1; B = 2 (1 + 1) / 1 = 4; log(en) = 1 + log 4
    le = 1.0 + math.log(4.0)
    pt = [4.0, 24.0 * a, 20.0 * a * math.log(32.0) / 4.0 ** (1 / 3), 5.1 / 4.0 ** (5 / 6)]
    pi = [sum(pt), (132.0 * phi2) ** (4 / 3), 19.0 / phi4, 37.0 ** (4 / 7), (24.0 / phi4**5) ** (4 / 11)]
    Pi = max(pi)
    mm = [2 * Pi, (112.0 * phi2 + 83.0) ** (4 / 3), 48.0 ** (10 / 23) / phi4 ** (32 / 23), 36.0 * phi2 ** (2 / 3),
          124.0**2 / (2.0 ** (17 / 8) * 4.0 ** (5 / 16))]
    M = max(mm)
    bb = [1 / (3 * (phi4**4 * Pi) ** (1 / 3)), 1 / (4 * (phi4**4 * M) ** (4 / 15)), le ** (-1 / 3) / (2 * (4 * phi4) ** (1 / 3)),
          Pi ** (1 / 9) * le ** (-4 / 9) / (2 * 4.0 ** (4 / 9))]
    for got, want in zip(rec["Pi_tilde_terms"], pt):
        assert got == pytest.approx(want, rel=1e-12)
    for got, want in zip(rec["Pi_branches"], pi):
        assert got == pytest.approx(want, rel=1e-12)
    for got, want in zip(rec["M_branches"], mm):
        assert got == pytest.approx(want, rel=1e-12)
    for got, want in zip(rec["B0_branches"][:4], bb):
        assert got == pytest.approx(want, rel=1e-12)
    assert rec["B0_branches"][4] is None  # frakC = 0 removes that branch
    assert rec["B0"] == pytest.approx(min(bb), rel=1e-12)


def test_cramer_requires_bundle():
    with pytest.raises(ValueError, match="ConstantBundle"):
        K.cramer_constants(1.0, 1.0, 1.0, 1, 4)
    with pytest.raises(ValueError, match="n >= 4"):
        K.cramer_constants(1.0, 1.0, 1.0, 1, 3, bundle=_bundle11())


def test_c52_alpha_free_and_guard_scan():
    a = K.rate_cramer_c52(1.0, 1.0, (1, 1), 0.0, 1, 1000, 1.0).total
    assert K.rate_cramer_c52(1.0, 2.0, (1, 1), 0.0, 1, 1000, 1.0).total == a
    # n >= (log en)^{32/5} at mu = 0, p = 1 holds at n = 1, fails from n = 2 and holds
    # again from the threshold below on (found by bisection; increasing past it)
    n_star = 229_911_006
    guard = lambda n: K.rate_cramer_c52(1.0, 1.0, (1, 1), 0.0, 1, n, 0.0).validity["guard_sample_size"]
    assert guard(1) and not guard(2) and not guard(n_star - 1) and guard(n_star) and guard(10 * n_star)
    with pytest.raises(ValueError):
        K.rate_cramer_c52(1.0, 0.5, (1, 1), 0.0, 1, 1000, 1.0)


def test_pmview_report_guard():
    from hdclt.randvec import CovarianceSpec, DistributionFamily, pseudo_moments

    rep = pseudo_moments(DistributionFamily("laplace", CovarianceSpec.identity(2)), 0, 0.5, mu=1.0)
    v = K.PMView(rep)
    assert v.M_n(1.0) == rep.M_n_of_phi
    with pytest.raises(ValueError, match="cannot bound"):
        v.M_n(0.1)
