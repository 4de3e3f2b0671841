"""Monte Carlo estimates of CLT discrepancies for ||S_n||_inf.

S_n = n^{-1/2} (X_1 + ... + X_n) with iid X_i from a DistributionFamily and
U_{n,k} the Lindeberg interpolation that keeps the first k summands and
replaces the rest by matched Gaussians.  When the covariance is diagonal
the Gaussian side uses the exact product CDF, so only the S_n side is
noisy.
"""
from __future__ import annotations

import csv
import io
import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import rng as _rng
from ._kernels import ecdf_sup_two_sample, rowmax_abs
from .gaussmax import exact_sup_cdf_diag, exact_sup_sf_diag, norm_cdf
from .randvec import DistributionFamily, matched_gaussian

DEFAULT_BUDGET = 2**32
QUANTILE_LEVELS = 512
SCHEMA_VERSION = "1"


class BudgetError(ValueError):
    pass


def budget_limit() -> int:
    return int(os.environ.get("HDCLT_BUDGET", DEFAULT_BUDGET))


def check_budget(n: int, p: int, reps: int, budget: int | None = None):
    limit = budget_limit() if budget is None else int(budget)
    cost = int(n) * int(p) * int(reps)
    if cost > limit:
        fit = max(limit // (int(n) * int(p)), 0)
        raise BudgetError(
            f"n*p*reps = {cost} exceeds the budget of {limit} elements; "
            f"reduce reps to <= {fit}, lower n or p, or raise HDCLT_BUDGET"
        )


# ---------------------------------------------------------------- samplers

def _norms(family: DistributionFamily, n: int, k_true: int, reps: int, g, method: str) -> np.ndarray:
    """||U_{n,k}||_inf for one block: k true summands plus n-k Gaussian ones."""
    p = family.p
    z = family.coord_sum(g, k_true, reps, method=method) if k_true > 0 else np.zeros((reps, p))
    if n - k_true > 0:
        z = z + math.sqrt(n - k_true) * g.standard_normal((reps, p))
    return rowmax_abs(family.cov.apply(z / math.sqrt(n)))


def sample_norm_S(family, n, reps, seed, workers=None, method="auto", tag="S") -> np.ndarray:
    """reps draws of ||S_n||_inf (block streams; worker-count independent)."""
    exp = f"experiments:{tag}:{family.family_id}:n={n}:{method}"
    return _rng.concat_blocks(lambda g, k: _norms(family, n, n, k, g, method), reps, seed, exp, workers=workers)


def sample_norm_U(family, n, k, reps, seed, workers=None, method="auto", tag="U") -> np.ndarray:
    exp = f"experiments:{tag}:{family.family_id}:n={n}:k={k}:{method}"
    return _rng.concat_blocks(lambda g, b: _norms(family, n, k, b, g, method), reps, seed, exp, workers=workers)


# ---------------------------------------------------------------- delta

@dataclass
class DeltaEstimate:
    m: float
    n: int
    p: int
    reps: int
    r_grid: np.ndarray
    delta_hat: float
    argmax_r: float
    se_at_argmax: float
    family_id: str
    seed: int
    gaussian_side: str
    grid_policy: str
    r_max: float
    tail_annotation: float
    curve: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {
            "m": self.m, "n": self.n, "p": self.p, "reps": self.reps,
            "delta_hat": self.delta_hat, "argmax_r": self.argmax_r, "se_at_argmax": self.se_at_argmax,
            "family_id": self.family_id, "seed": self.seed, "gaussian_side": self.gaussian_side,
            "grid_policy": self.grid_policy, "grid_size": int(self.r_grid.size), "r_max": self.r_max,
            "tail_annotation": self.tail_annotation,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("schema_version", "r", "F_S", "F_U", "weighted_diff"))
        c = self.curve
        for r, fs, fu, d in zip(c["r"], c["F_S"], c["F_U"], c["weighted_diff"]):
            w.writerow((SCHEMA_VERSION, repr(float(r)), repr(float(fs)), repr(float(fu)), repr(float(d))))
        return buf.getvalue()


def _weight(r, m):
    return np.abs(r) ** m if m > 0 else np.ones_like(r)


def _sup_vs_exact(s_sorted: np.ndarray, cdf, m: float, extra: np.ndarray):
    """sup_r r^m |F_hat(r) - F(r)| for an ECDF against a continuous CDF.

    Checked at every sample point from both sides of its jump, plus ``extra``
    points (which matter only for m > 0 between jumps).
    """
    N = s_sorted.size
    hi_idx = np.searchsorted(s_sorted, s_sorted, side="right")
    lo_idx = np.searchsorted(s_sorted, s_sorted, side="left")
    F = cdf(s_sorted)
    w = _weight(s_sorted, m)
    d_right = w * np.abs(hi_idx / N - F)
    d_left = w * np.abs(lo_idx / N - F)
    Fe = cdf(extra)
    de = _weight(extra, m) * np.abs(np.searchsorted(s_sorted, extra, side="right") / N - Fe)
    cands = [(d_right, s_sorted, hi_idx / N), (d_left, s_sorted, lo_idx / N), (de, extra, np.searchsorted(s_sorted, extra, side="right") / N)]
    best = (-1.0, 0.0, 0.0)
    for d, rr, fh in cands:
        if d.size == 0:
            continue
        k = int(np.argmax(d))
        if d[k] > best[0]:
            best = (float(d[k]), float(rr[k]), float(fh[k]))
    return best


def estimate_delta(family: DistributionFamily, n: int, m: float = 0.0, reps: int = 100_000, grid_policy: str = "exact",
                   seed: int = 0, workers=None, gaussian_side: str = "auto", method: str = "auto", budget=None) -> DeltaEstimate:
    """Estimate sup_r r^m |P(||S_n|| <= r) - P(||U_{n,0}|| <= r)|.

    grid_policy ``exact`` evaluates at every pooled sample point (exact for
    the empirical functional at m = 0); ``quantiles`` uses 512 pooled
    quantile levels.  For diagonal covariance and gaussian_side ``auto`` the
    Gaussian CDF is exact.  Both policies add a uniform grid on [0, r_max]
    with r_max = max observed + 3 sigma_max; the tail beyond r_max is
    reported as a plug-in Markov bound in ``tail_annotation``.
    """
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    if m < 0:
        raise ValueError("m must be nonnegative")
    if grid_policy not in ("exact", "quantiles"):
        raise ValueError(f"unknown grid_policy {grid_policy!r}")
    check_budget(n, family.p, reps, budget)
    cov = family.cov
    s = np.sort(sample_norm_S(family, n, reps, seed, workers, method))
    exact_u = gaussian_side == "exact" or (gaussian_side == "auto" and cov.is_diagonal)
    if exact_u and not cov.is_diagonal:
        raise ValueError("exact Gaussian side needs diagonal covariance")
    r_max = float(s[-1]) + 3.0 * cov.sigma_max
    uniform = np.linspace(0.0, r_max, QUANTILE_LEVELS)
    levels = (np.arange(QUANTILE_LEVELS) + 0.5) / QUANTILE_LEVELS
    if exact_u:
        v = cov.variances
        cdf = lambda r: exact_sup_cdf_diag(v, r)
        if grid_policy == "exact":
            d, rstar, fhat = _sup_vs_exact(s, cdf, m, uniform)
            grid = s
        else:
            grid = np.unique(np.concatenate([np.quantile(s, levels), uniform]))
            fs = np.searchsorted(s, grid, side="right") / s.size
            dd = _weight(grid, m) * np.abs(fs - cdf(grid))
            k = int(np.argmax(dd))
            d, rstar, fhat = float(dd[k]), float(grid[k]), float(fs[k])
        fu_star = float(cdf(rstar))
        se = _weight(np.array(rstar), m) * math.sqrt(max(fhat * (1 - fhat), fu_star * (1 - fu_star)) / s.size)
        u_tail_moment = None
        tail = _markov_tail(s, None, m, r_max, exact_tail=float(exact_sup_sf_diag(v, r_max)))
        fu_curve = lambda r: cdf(r)
        side = "exact"
    else:
        u = np.sort(sample_norm_U(matched_gaussian(family), n, 0, reps, seed, workers, "auto", tag="U0"))
        if grid_policy == "exact":
            d, rstar, fx, fy = ecdf_sup_two_sample(s, u, m)
            grid = np.concatenate([s, u])
        else:
            grid = np.unique(np.concatenate([np.quantile(np.concatenate([s, u]), levels), uniform]))
            fx_all = np.searchsorted(s, grid, side="right") / s.size
            fy_all = np.searchsorted(u, grid, side="right") / u.size
            dd = _weight(grid, m) * np.abs(fx_all - fy_all)
            k = int(np.argmax(dd))
            d, rstar, fx, fy = float(dd[k]), float(grid[k]), float(fx_all[k]), float(fy_all[k])
        se = _weight(np.array(rstar), m) * math.sqrt(fx * (1 - fx) / s.size + fy * (1 - fy) / u.size)
        tail = _markov_tail(s, u, m, r_max)
        fu_curve = lambda r: np.searchsorted(u, r, side="right") / u.size
        side = "monte_carlo"
    curve_r = np.unique(np.concatenate([np.quantile(s, levels), uniform]))
    fs_c = np.searchsorted(s, curve_r, side="right") / s.size
    fu_c = fu_curve(curve_r)
    curve = {"r": curve_r, "F_S": fs_c, "F_U": fu_c, "weighted_diff": _weight(curve_r, m) * np.abs(fs_c - fu_c)}
    return DeltaEstimate(
        m=m, n=n, p=family.p, reps=reps, r_grid=np.asarray(grid), delta_hat=float(d), argmax_r=float(rstar),
        se_at_argmax=float(se), family_id=family.family_id, seed=seed, gaussian_side=side, grid_policy=grid_policy,
        r_max=r_max, tail_annotation=tail, curve=curve,
    )


def _markov_tail(s, u, m, r_max, exact_tail=None) -> float:
    """Bound on sup_{r > r_max} r^m |F_S(r) - F_U(r)| (plug-in moments)."""
    if m == 0:
        # beyond the largest S draw F_hat_S = 1, so the gap is the U tail
        if exact_tail is not None:
            return exact_tail
        return float(np.mean(u > r_max)) if u is not None else 0.0
    es = float(np.mean(s ** (m + 1.0)))
    if u is not None:
        eu = float(np.mean(u ** (m + 1.0)))
    else:
        eu = float(np.mean(s ** (m + 1.0)))  # matched second moments; same order
    return (es + eu) / r_max


# ---------------------------------------------------------------- exact 1-D oracle

def rademacher_exact_delta(n: int) -> tuple[float, float]:
    """Exact sup_r |P(|S_n| <= r) - P(|Z| <= r)| for Rademacher p = 1.

    S_n = (2B - n)/sqrt(n) with B ~ Bin(n, 1/2); the binomial pmf is the
    n-fold convolution of the sign law.  Returns (distance, argmax r).
    """
    k = np.arange(n + 1)
    pmf = stats.binom.pmf(k, n, 0.5)
    a = np.abs(2 * k - n)
    vals = np.unique(a)
    mass = np.array([pmf[a == v].sum() for v in vals])
    F_right = np.cumsum(mass)
    F_left = F_right - mass
    r = vals / math.sqrt(n)
    G = 2.0 * norm_cdf(r) - 1.0
    d = np.maximum(np.abs(F_right - G), np.abs(F_left - G))
    j = int(np.argmax(d))
    return float(d[j]), float(r[j])


def rademacher_exact_tail_ratio(n: int, r: float) -> float:
    """P(|S_n| > r) / P(|Z| > r) for Rademacher p = 1, exactly."""
    k = np.arange(n + 1)
    pmf = stats.binom.pmf(k, n, 0.5)
    sn = np.abs(2 * k - n) / math.sqrt(n)
    num = pmf[sn > r].sum()
    return float(num / (2.0 * norm_cdf(-r)))


# ---------------------------------------------------------------- Lindeberg path

@dataclass
class LindebergPath:
    n: int
    k_list: list
    r: float
    deltas: dict
    reps: int
    seed: int
    family_id: str

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("schema_version", "k", "r", "delta", "se"))
        for k in self.k_list:
            est, se = self.deltas[k]
            w.writerow((SCHEMA_VERSION, k, repr(self.r), repr(est), repr(se)))
        return buf.getvalue()


def lindeberg_path(family: DistributionFamily, n: int, k_list, r: float, reps: int = 100_000, seed: int = 0,
                   workers=None, budget=None) -> LindebergPath:
    """Delta_{n,k}(r) = |P(||U_{n,k}|| <= r) - P(||U_{n,0}|| <= r)| for each k."""
    ks = [int(k) for k in k_list]
    if any(k < 0 or k > n for k in ks):
        raise ValueError("k_list must lie in [0, n]")
    check_budget(n, family.p, reps * max(len(ks), 1), budget)
    cov = family.cov
    if cov.is_diagonal:
        f0 = float(exact_sup_cdf_diag(cov.variances, r))
        se0 = 0.0
    else:
        u0 = sample_norm_U(family, n, 0, reps, seed, workers, tag="U0ref")
        f0 = float(np.mean(u0 <= r))
        se0 = math.sqrt(f0 * (1 - f0) / reps)
    out = {}
    for k in ks:
        x = sample_norm_U(family, n, k, reps, seed, workers, tag="Uk")
        f = float(np.mean(x <= r))
        out[k] = (abs(f - f0), math.sqrt(f * (1 - f) / reps + se0**2))
    return LindebergPath(n, ks, float(r), out, reps, seed, family.family_id)


# ---------------------------------------------------------------- Cramer ratio

def estimate_cramer_ratio(family: DistributionFamily, n: int, r: float, reps: int = 100_000, seed: int = 0,
                          workers=None, budget=None):
    """(ratio_hat, se, resolvable) for P(||S_n|| > r) / P(||Y|| > r)."""
    check_budget(n, family.p, reps, budget)
    cov = family.cov
    floor = 10.0 / reps
    if cov.is_diagonal:
        q = float(exact_sup_sf_diag(cov.variances, r))
        se_q = 0.0
    else:
        y = sample_norm_U(family, n, 0, reps, seed, workers, tag="cramerY")
        q = float(np.mean(y > r))
        se_q = math.sqrt(q * (1 - q) / reps)
    if q < floor:
        return float("nan"), float("nan"), False
    s = sample_norm_S(family, n, reps, seed, workers, tag="cramerS")
    phat = float(np.mean(s > r))
    ratio = phat / q
    se_p = math.sqrt(phat * (1 - phat) / reps)
    # delta method for a ratio of independent estimates
    se = math.sqrt((se_p / q) ** 2 + (phat * se_q / q**2) ** 2)
    return ratio, se, True


# ---------------------------------------------------------------- moments

def estimate_moment_diff(family: DistributionFamily, n: int, m: float, reps: int = 100_000, seed: int = 0,
                         workers=None, budget=None):
    """(E||S_n||^m - E||U_{n,0}||^m estimate, se); independent samples, no CRN."""
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    if m < 1:
        raise ValueError("m must be >= 1")
    check_budget(n, family.p, reps, budget)
    s = sample_norm_S(family, n, reps, seed, workers, tag="momS") ** m
    u = sample_norm_U(matched_gaussian(family), n, 0, reps, seed, workers, tag="momU") ** m
    diff = float(s.mean() - u.mean())
    se = math.sqrt(s.var(ddof=1) / reps + u.var(ddof=1) / reps)
    return diff, se


# ---------------------------------------------------------------- bound comparison

@dataclass
class Comparison:
    estimate: float
    se: float
    bound: float
    vacuous: bool
    slack: float
    passed: bool
    theorem: str

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def compare_bound(estimate, bundle) -> Comparison:
    """Pass iff bound - estimate >= -3 SE.

    ``estimate`` is a DeltaEstimate or a (value, se, context) tuple with
    context a dict holding n and p.
    """
    echo = bundle.inputs_echo
    if isinstance(estimate, DeltaEstimate):
        val, se, ctx = estimate.delta_hat, estimate.se_at_argmax, {"n": estimate.n, "p": estimate.p, "m": estimate.m}
    else:
        val, se, ctx = estimate
    for key in ("n", "p", "m"):
        if key in ctx and key in echo and float(ctx[key]) != float(echo[key]):
            raise ValueError(f"context mismatch on {key}: estimate {ctx[key]} vs bound {echo[key]}")
    if float(ctx.get("m", 0)) != float(echo.get("m", 0)):
        raise ValueError("context mismatch on m")
    slack = bundle.total - val
    return Comparison(val, se, bundle.total, bundle.vacuous, slack, slack >= -3.0 * se, bundle.theorem)
