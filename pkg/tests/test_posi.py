import math

import numpy as np
import pytest

from hdclt import posi as P

HADAMARD2 = np.array([[1.0, 1.0], [1.0, -1.0], [-1.0, 1.0], [-1.0, -1.0]])


def test_submodel_counts():
    assert P.count_submodels(10, 10) == 1023
    assert len(P.enumerate_submodels(10, 10)) == 1023
    assert P.enumerate_submodels(3, 2) == [(0,), (0, 1), (0, 2), (1,), (1, 2), (2,)]
    with pytest.raises(ValueError, match="cap"):
        P.enumerate_submodels(30, 10, cap=1000)


def test_kappa_of_correlated_pair():
    rho = 0.3
    # n^{-1} X'X = [[1, rho], [rho, 1]] from a 2-point square-root design
    L = np.linalg.cholesky(np.array([[1.0, rho], [rho, 1.0]]))
    d = P.DesignMatrix(np.sqrt(2.0) * L.T)
    assert np.allclose(d.gram, [[1.0, rho], [rho, 1.0]])
    kappa, worst = P.rip_kappa(d, 2)
    assert kappa == pytest.approx(rho, rel=1e-12) and worst == (0, 1)
    assert P.rip_kappa(d, 1)[0] == pytest.approx(0.0, abs=1e-15)


def test_kappa_exactly_zero_and_monotone():
    assert P.rip_kappa(P.DesignMatrix(HADAMARD2), 2) == (0.0, None)
    d = P.DesignMatrix(np.random.default_rng(0).standard_normal((200, 6)))
    ks = [P.rip_kappa(d, k)[0] for k in range(1, 7)]
    assert all(a <= b for a, b in zip(ks, ks[1:]))


def test_kappa_violated_for_collinear():
    x = np.array([[1.0, 1.0], [2.0, 2.0], [0.5, 0.5]])
    assert P.rip_kappa(P.DesignMatrix(x), 2)[0] == P.VIOLATED
    with pytest.raises(P.SingularSubmodelError, match="M=\\[1, 2\\]"):
        P.simulate_max_t(P.DesignMatrix(x), 2, reps=1000)


def test_orthonormal_closed_form():
    assert P.orthonormal_quantile(2, 0.05) == pytest.approx(2.2365, abs=1e-4)
    res = P.simulate_max_t(P.DesignMatrix(HADAMARD2), 2, reps=200_000, seed=1)
    assert abs(res.quantile[0.05] - 2.2365) <= 0.02
    assert res.n_models == 3 and res.kappa == 0.0


def test_single_column_median():
    from scipy import stats

    med = stats.norm.ppf(0.75)
    res = P.simulate_max_t(P.DesignMatrix(np.ones((5, 1))), 1, reps=100_000, seed=2)
    # asymptotic SE of a sample median: 1 / (2 f(med) sqrt(N)), f the density of |Z|
    se = 1.0 / (2 * 2 * stats.norm.pdf(med) * math.sqrt(res.reps))
    assert abs(res.mu_posi - med) <= 4 * se


def test_scale_invariance():
    d = P.DesignMatrix(np.random.default_rng(3).standard_normal((20, 4)))
    a = P.simulate_max_t(d, 2, var_y=1.0, reps=50_000, seed=4)
    b = P.simulate_max_t(d, 2, var_y=4.0, reps=50_000, seed=4)
    assert abs(a.quantile[0.05] - b.quantile[0.05]) <= 3 * math.hypot(a.quantile_se[0.05], b.quantile_se[0.05])


def test_orthonormal_design_helper():
    d = P.DesignMatrix.orthonormal(50, 5, seed=1)
    assert np.allclose(d.gram, np.eye(5), atol=1e-12)
    with pytest.raises(ValueError):
        P.DesignMatrix.orthonormal(3, 5)


@pytest.mark.parametrize("d", [2, 8, 32])
def test_width_bound_dominates_orthonormal(d):
    design = P.DesignMatrix.orthonormal(64, d, seed=d)
    res = P.simulate_max_t(design, 1, reps=20_000, seed=d)
    kappa = res.kappa if res.kappa != P.VIOLATED else 1.0
    assert kappa < 1e-12
    assert P.posi_width_bound(0.0, d, 1) >= res.mu_posi


def test_width_bound_examples_and_errors():
    assert P.posi_width_bound(0.0, 2, 2) == pytest.approx(math.sqrt(2 * math.log(4)), rel=1e-15)
    assert P.posi_width_bound(0.0, 2, 2) == pytest.approx(1.6651, abs=1e-4)
    assert P.posi_width_bound(0.2, 10, 3) < P.posi_width_bound(0.3, 10, 3) < P.posi_width_bound(0.3, 10, 4)
    with pytest.raises(ValueError):
        P.posi_width_bound(1.0, 2, 2)
    with pytest.raises(ValueError):
        P.posi_width_bound(P.VIOLATED, 2, 2)


def test_mam_bound():
    assert P.mam_bound(1, 1, 1, 1, 1, 1, 1) == pytest.approx(14.5)
    # m = 0: 2 (Delta + phi delta) + phi_m delta + tail
    assert P.mam_bound(0.1, 2.0, 3.0, 0.5, 0, 2.0, 0.01) == pytest.approx(2 * (0.1 + 1.0) + 1.5 + 0.01)
    # delta -> 0 leaves 2 (5/4)^m Delta + r^m tail
    assert P.mam_bound(0.1, 2.0, 3.0, 1e-300, 2, 2.0, 0.01) == pytest.approx(2 * 1.5625 * 0.1 + 4 * 0.01)
    with pytest.raises(ValueError):
        P.mam_bound(-1, 1, 1, 1, 1, 1, 1)


def test_result_dict_roundtrips_json():
    import json

    res = P.simulate_max_t(P.DesignMatrix(HADAMARD2), 1, reps=2000, seed=0, alphas=(0.05, 0.1))
    doc = json.loads(json.dumps(res.to_dict()))
    assert set(doc["quantiles"]) == {"0.05", "0.1"} and doc["n_models"] == 2
