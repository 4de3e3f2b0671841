"""Simultaneous post-selection inference for fixed-design linear regression.

For every submodel M with |M| <= k the OLS coefficient is linear in Y, so
the max-|t| statistic over all (M, j) is the sup-norm of a Gaussian vector
whose covariance is fixed by the design.  Simulating it gives mu_PoSI
(the median) and simultaneous quantiles.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import rng as _rng
from ._kernels import rowmax_abs
from .gaussmax import median_ci

DEFAULT_CAP = 100_000
VIOLATED = "violated"


class SingularSubmodelError(ValueError):
    def __init__(self, model, cond):
        self.model = tuple(model)
        self.cond = cond
        super().__init__(f"submodel Gram is singular for M={[j + 1 for j in model]} (condition number {cond:.3g})")


@dataclass
class DesignMatrix:
    x: np.ndarray
    gram: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or not np.all(np.isfinite(x)):
            raise ValueError("design must be a finite n x d matrix")
        self.x = x
        self.gram = x.T @ x / x.shape[0]

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @classmethod
    def from_csv(cls, path) -> "DesignMatrix":
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))

    @classmethod
    def orthonormal(cls, n: int, d: int, seed: int = 0) -> "DesignMatrix":
        """n x d design with n^{-1} X'X = I exactly up to rounding."""
        if d > n:
            raise ValueError("need n >= d")
        g = _rng.stream(seed, "posi:orthonormal", n, d)
        q, _ = np.linalg.qr(g.standard_normal((n, d)))
        return cls(math.sqrt(n) * q)

    def submodel_gram(self, model) -> np.ndarray:
        idx = list(model)
        return self.gram[np.ix_(idx, idx)]


def count_submodels(d: int, k: int) -> int:
    return sum(math.comb(d, j) for j in range(1, min(k, d) + 1))


def enumerate_submodels(d: int, k: int, cap: int = DEFAULT_CAP) -> list[tuple]:
    """All nonempty M of size <= k in lexicographic order (0-based indices)."""
    if d < 1 or k < 1:
        raise ValueError("d and k must be >= 1")
    total = count_submodels(d, k)
    if total > cap:
        raise ValueError(f"{total} submodels exceed the cap of {cap}")
    models = [c for j in range(1, min(k, d) + 1) for c in itertools.combinations(range(d), j)]
    models.sort()
    return models


def rip_kappa(design: DesignMatrix, k: int, cap: int = DEFAULT_CAP):
    """max over |M| <= k of max(lambda_max - 1, 1 - lambda_min) of Omega_M.

    Returns (kappa, worst_model); kappa is VIOLATED when it reaches 1,
    which includes every singular submodel.
    """
    kappa, worst = 0.0, None
    for model in enumerate_submodels(design.d, k, cap):
        om = design.submodel_gram(model)
        if np.array_equal(om, np.eye(len(model))):
            continue  # exact identity; skip eigensolver rounding
        ev = np.linalg.eigvalsh(om)
        dev = max(ev[-1] - 1.0, 1.0 - ev[0])
        if dev > kappa:
            kappa, worst = float(dev), model
    if kappa >= 1.0:
        return VIOLATED, worst
    return kappa, worst


def _t_columns(design: DesignMatrix, models, var_y) -> np.ndarray:
    """n x (sum |M|) matrix; column (M, j) maps g to G_{j,M} after the n^{-1/2} factor."""
    n = design.n
    var = np.broadcast_to(np.asarray(var_y, dtype=np.float64), (n,))
    if not np.all(var > 0):
        raise ValueError("var_y must be positive")
    cols = []
    for model in models:
        om = design.submodel_gram(model)
        cond = np.linalg.cond(om)
        if not np.isfinite(cond) or cond > 1e12:
            raise SingularSubmodelError(model, cond)
        a = np.linalg.solve(om, design.x[:, list(model)].T).T  # rows are Omega_M^{-1} x_{i,M}
        sigma = np.sqrt((var[:, None] * a * a).sum(axis=0) / n)
        cols.append(a / sigma)
    return np.concatenate(cols, axis=1) / math.sqrt(n)


@dataclass
class PoSIResult:
    k: int
    n_models: int
    mu_posi: float
    quantile: dict
    kappa: object
    reps: int
    seed: int
    mu_ci: tuple = (float("nan"), float("nan"))
    quantile_se: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "k": self.k, "n_models": self.n_models, "mu_posi": self.mu_posi, "mu_ci": list(self.mu_ci),
            "quantiles": {str(a): q for a, q in self.quantile.items()},
            "quantile_se": {str(a): s for a, s in self.quantile_se.items()},
            "kappa": self.kappa, "reps": self.reps, "seed": self.seed,
        }


def _quantile_se(sorted_stat: np.ndarray, level: float) -> float:
    """SE of an empirical quantile from its 95% order-statistic interval."""
    n = sorted_stat.size
    half = 1.959964 * math.sqrt(level * (1 - level) / n)
    lo = sorted_stat[max(int(math.floor((level - half) * n)), 0)]
    hi = sorted_stat[min(int(math.ceil((level + half) * n)), n - 1)]
    return float(hi - lo) / (2 * 1.959964)


def simulate_max_t(design: DesignMatrix, k: int, var_y=1.0, reps: int = 100_000, seed: int = 0, alphas=(0.05,),
                   workers=None, cap: int = DEFAULT_CAP) -> PoSIResult:
    models = enumerate_submodels(design.d, k, cap)
    A = _t_columns(design, models, var_y)
    sd = np.sqrt(np.broadcast_to(np.asarray(var_y, dtype=np.float64), (design.n,)))
    exp = f"posi:max_t:n={design.n}:d={design.d}:k={k}"
    stat = _rng.concat_blocks(lambda g, b: rowmax_abs((g.standard_normal((b, design.n)) * sd) @ A), reps, seed, exp, workers=workers)
    stat.sort()
    quant = {float(a): float(np.quantile(stat, 1.0 - a)) for a in alphas}
    qse = {float(a): _quantile_se(stat, 1.0 - a) for a in alphas}
    kappa, _ = rip_kappa(design, k, cap)
    mu = float(np.median(stat))
    return PoSIResult(k, len(models), mu, quant, kappa, reps, seed, median_ci(stat), qse)


def orthonormal_quantile(d: int, alpha: float) -> float:
    """Closed form for an orthonormal design: (2N(q) - 1)^d = 1 - alpha."""
    target = (1.0 - alpha) ** (1.0 / d)
    return float(math.sqrt(2.0) * special.erfinv(target))


def posi_width_bound(kappa, d: int, k: int, c_kappa: float = 1.0) -> float:
    """sqrt(2 log 2d) + C(kappa) kappa sqrt(2k log(6d/k)); C defaults to 1 (approximate)."""
    if kappa == VIOLATED or not 0.0 <= float(kappa) < 1.0:
        raise ValueError("kappa must lie in [0, 1)")
    if not 1 <= k <= d:
        raise ValueError("need 1 <= k <= d")
    return math.sqrt(2.0 * math.log(2.0 * d)) + c_kappa * float(kappa) * math.sqrt(2.0 * k * math.log(6.0 * d / k))


def mam_bound(delta_psi_nm, phi_ac0_psi, phi_acm_psi, delta, m, r, tail_rn) -> float:
    """Bound on the weighted discrepancy of a max-of-approximately-linear statistic."""
    vals = (delta_psi_nm, phi_ac0_psi, phi_acm_psi, delta, m, r, tail_rn)
    if any(v < 0 for v in vals):
        raise ValueError("inputs must be nonnegative")
    if delta <= 0:
        raise ValueError("delta must be positive")
    return (2.0 * (1.25**m * delta_psi_nm + 5.0**m * phi_ac0_psi * delta ** (m + 1))
            + phi_acm_psi * delta + r**m * tail_rn)
