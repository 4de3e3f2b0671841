"""Statistics of the Gaussian supremum ||Y||_inf: median, bands, tails.

Diagonal covariances get exact answers from the product of coordinate
CDFs; everything else is Monte Carlo with binomial standard errors.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize, special, stats

from . import rng as _rng
from ._kernels import rowmax_abs
from .randvec import CovarianceSpec

SCHEMA_VERSION = "1"
_SQRT2 = math.sqrt(2.0)


def norm_cdf(x):
    """Standard normal CDF through erfc (accurate in both tails)."""
    return 0.5 * special.erfc(-np.asarray(x, dtype=np.float64) / _SQRT2)


def _check_sd(variances) -> np.ndarray:
    v = np.atleast_1d(np.asarray(variances, dtype=np.float64))
    if v.size == 0 or not np.all(v > 0):
        raise ValueError("all variances must be positive")
    return np.sqrt(v)


def exact_sup_cdf_diag(variances, r):
    """P(||Y||_inf <= r) for Y ~ N(0, diag(variances)); vectorized in r."""
    sd = _check_sd(variances)
    r_arr = np.asarray(r, dtype=np.float64)
    rr = np.maximum(r_arr, 0.0)[..., None]
    # P(|Y_j| <= r) = erf(r / (sd sqrt 2)); sum logs so p = 256 keeps precision
    with np.errstate(divide="ignore"):
        out = np.exp(np.log(special.erf(rr / (sd * _SQRT2))).sum(axis=-1))
    out = np.where(r_arr < 0, 0.0, out)
    return float(out) if np.ndim(out) == 0 else out


def exact_sup_sf_diag(variances, r):
    """P(||Y||_inf > r), computed without cancellation for large r."""
    sd = _check_sd(variances)
    r_arr = np.asarray(r, dtype=np.float64)
    rr = np.maximum(r_arr, 0.0)[..., None]
    tail = special.erfc(rr / (sd * _SQRT2))
    with np.errstate(divide="ignore"):
        out = -np.expm1(np.log1p(-tail).sum(axis=-1))
    out = np.where(r_arr < 0, 1.0, out)
    return float(out) if np.ndim(out) == 0 else out


def exact_median_diag(variances) -> float:
    sd = _check_sd(variances)
    hi = float(sd.max())
    while exact_sup_cdf_diag(sd**2, hi) < 0.5:
        hi *= 2.0
    return optimize.brentq(lambda r: exact_sup_cdf_diag(sd**2, r) - 0.5, 0.0, hi, xtol=1e-14, rtol=1e-15)


def sample_sup(cov: CovarianceSpec, reps: int, seed: int, tag: str = "sup", workers=None) -> np.ndarray:
    """reps independent draws of ||Y||_inf with Y ~ N(0, cov)."""
    exp = f"gaussmax:{tag}:{cov_id(cov)}"
    return _rng.concat_blocks(
        lambda g, k: rowmax_abs(cov.apply(g.standard_normal((k, cov.p)))), reps, seed, exp, workers=workers
    )


def cov_id(cov: CovarianceSpec) -> str:
    if cov.kind == "equicorrelated":
        rho, s2, p = cov.params
        return f"equi(rho={rho:g},s2={s2:g},p={int(p)})"
    if cov.kind == "diagonal":
        v = np.asarray(cov.params)
        if np.all(v == v[0]):
            return f"diag({v[0]:g}x{v.size})"
        return f"diag(p={v.size},min={v.min():g},max={v.max():g})"
    return f"dense(p={cov.p})"


@dataclass(frozen=True)
class GaussianMaxSummary:
    median_mu: float
    mu_ci: tuple
    sigma_min: float
    sigma_max: float
    reps: int
    method: str

    def __post_init__(self):
        if not self.sigma_min <= self.sigma_max:
            raise ValueError("sigma_min must not exceed sigma_max")
        lo, hi = self.mu_ci
        if not lo <= self.median_mu <= hi:
            raise ValueError("mu_ci must contain median_mu")


def median_ci(sorted_sample: np.ndarray, level: float = 0.99) -> tuple[float, float]:
    """Distribution-free order-statistic interval for the median."""
    n = sorted_sample.size
    a = (1.0 - level) / 2.0
    lo = int(stats.binom.ppf(a, n, 0.5))
    hi = int(stats.binom.isf(a, n, 0.5))
    lo = min(max(lo, 1), n)
    hi = min(max(hi, 1), n)
    return float(sorted_sample[lo - 1]), float(sorted_sample[hi - 1])


def estimate_summary(cov: CovarianceSpec, reps: int = 100_000, seed: int = 0, method: str = "auto", workers=None) -> GaussianMaxSummary:
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    if method == "auto" and cov.is_diagonal:
        mu = exact_median_diag(cov.variances)
        return GaussianMaxSummary(mu, (mu, mu), cov.sigma_min, cov.sigma_max, reps, "exact_diag")
    s = np.sort(sample_sup(cov, reps, seed, "summary", workers))
    mu = float(np.median(s))
    lo, hi = median_ci(s)
    return GaussianMaxSummary(mu, (min(lo, mu), max(hi, mu)), cov.sigma_min, cov.sigma_max, reps, "monte_carlo")


def mc_prob(hits: np.ndarray) -> tuple[float, float]:
    n = hits.size
    est = float(hits.mean())
    return est, math.sqrt(est * (1.0 - est) / n)


def band_probability(cov: CovarianceSpec, r: float, eps: float, reps: int = 100_000, seed: int = 0, method: str = "auto", workers=None):
    """(P(r - eps <= ||Y|| <= r + eps), se); se is 0 on the exact path."""
    if eps < 0 or r < 0:
        raise ValueError("r and eps must be nonnegative")
    if method == "auto" and cov.is_diagonal:
        v = cov.variances
        lo = r - eps
        val = exact_sup_cdf_diag(v, r + eps) - (exact_sup_cdf_diag(v, lo) if lo > 0 else 0.0)
        return max(float(val), 0.0), 0.0
    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    s = sample_sup(cov, reps, seed, "band", workers)
    return mc_prob((s >= r - eps) & (s <= r + eps))


# ---------------------------------------------------------------- tail checks

TAIL_HEADER = ("schema_version", "cov_id", "check", "r", "eps", "estimate", "se", "bound", "pass")


@dataclass
class TailCheckReport:
    cov_id: str
    reps: int
    seed: int
    rows: list = field(default_factory=list)
    excluded: list = field(default_factory=list)

    @property
    def violations(self) -> list:
        return [row for row in self.rows if not row["pass"]]

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TAIL_HEADER)
        for row in self.rows:
            w.writerow([SCHEMA_VERSION] + [_fmt(row[k]) for k in TAIL_HEADER[1:]])
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "schema_version": SCHEMA_VERSION,
            "cov_id": self.cov_id,
            "reps": self.reps,
            "seed": self.seed,
            "n_checks": len(self.rows),
            "n_violations": len(self.violations),
            "excluded": self.excluded,
        }
        return json.dumps(doc, indent=2, sort_keys=True)


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def check_tail_bounds(cov, summary, r_grid, eps_grid, reps=100_000, seed=0, workers=None, bundle=None):
    """Check the three Gaussian-supremum inequalities on an (r, eps) grid.

    (i)   P(||Y|| > r) >= phi0 exp(-r^2 / sigma_max^2)
    (ii)  P(||Y|| > r - eps) <= phi3 exp(phi4 (r + 1) eps) P(||Y|| > r)
    (iii) P(r - eps <= ||Y|| <= r + eps) <= phi2 eps (r + 1) P(||Y|| > r - eps)

    All probabilities come from one MC sample; each inequality gets 3 SE
    of slack.  Targets below 10/reps are excluded and listed.
    """
    from .constants import anticonc_constants

    if reps < 1000:
        raise ValueError("reps must be >= 1000")
    if abs(summary.sigma_max - cov.sigma_max) > 1e-12 or abs(summary.sigma_min - cov.sigma_min) > 1e-12:
        raise ValueError("summary was computed for a different covariance")
    if bundle is None:
        bundle = anticonc_constants(summary.median_mu, summary.sigma_min, summary.sigma_max, [0])
    s = np.sort(sample_sup(cov, reps, seed, "tail", workers))
    floor = 10.0 / reps
    rep = TailCheckReport(cov_id(cov), reps, seed)

    def tail(t):
        k = s.size - np.searchsorted(s, t, side="right")
        est = k / s.size
        return est, math.sqrt(est * (1.0 - est) / s.size)

    def band(lo, hi):
        k = np.searchsorted(s, hi, side="right") - np.searchsorted(s, lo, side="left")
        est = k / s.size
        return est, math.sqrt(est * (1.0 - est) / s.size)

    for r in map(float, r_grid):
        pr, se_r = tail(r)
        if pr < floor:
            rep.excluded.append({"r": r, "reason": f"P(||Y||>r)={pr:g} below 10/reps"})
            continue
        b = bundle.phi0 * math.exp(-bundle.phi1 * r * r)
        rep.rows.append(dict(cov_id=rep.cov_id, check="tail_lower", r=r, eps=0.0, estimate=pr, se=se_r, bound=b, **{"pass": pr >= b - 3 * se_r}))
        for eps in map(float, eps_grid):
            pl, se_l = tail(r - eps)
            expo = bundle.phi4 * (r + 1.0) * eps
            bound = bundle.phi3 * math.exp(expo) * pr if expo < 700.0 else math.inf
            se_c = math.hypot(se_l, bundle.phi3 * math.exp(min(bundle.phi4 * (r + 1.0) * eps, 700.0)) * se_r)
            rep.rows.append(dict(cov_id=rep.cov_id, check="ratio", r=r, eps=eps, estimate=pl, se=se_c, bound=bound, **{"pass": pl <= bound + 3 * se_c}))
            if eps > 0:
                pb, se_b = band(r - eps, r + eps)
                bound3 = bundle.phi2 * eps * (r + 1.0) * pl
                se3 = math.hypot(se_b, bundle.phi2 * eps * (r + 1.0) * se_l)
                rep.rows.append(dict(cov_id=rep.cov_id, check="band", r=r, eps=eps, estimate=pb, se=se3, bound=bound3, **{"pass": pb <= bound3 + 3 * se3}))
    return rep


def default_covariance_grid() -> list[CovarianceSpec]:
    """Covariances used by the tail and anti-concentration suites."""
    return [
        CovarianceSpec.identity(1),
        CovarianceSpec.identity(16),
        CovarianceSpec.identity(64),
        CovarianceSpec.diagonal(np.linspace(0.5, 2.0, 16)),
        CovarianceSpec.equicorrelated(0.5, 1.0, 16),
        CovarianceSpec.equicorrelated(0.9, 1.0, 64),
    ]


def check_anticoncentration(cov, bundle, m_list, eps_grid, r_grid, reps=100_000, seed=0, workers=None):
    """Check r^m P(r - eps <= ||Y|| <= r + eps) <= phi_ac[m] eps on a grid.

    Band probabilities are exact for diagonal covariance (se = 0) and come
    from one shared MC sample otherwise; the check allows 3 SE.
    """
    rep = TailCheckReport(cov_id(cov), reps, seed)
    exact = cov.is_diagonal
    s = None if exact else np.sort(sample_sup(cov, reps, seed, "anticonc", workers))
    for m in m_list:
        phi = bundle.phi_ac.get(m, bundle.phi_ac.get(float(m)))
        if phi is None:
            raise ValueError(f"bundle has no anti-concentration constant for m={m}")
        for eps in map(float, eps_grid):
            for r in map(float, r_grid):
                if exact:
                    est, se = band_probability(cov, r, eps)
                else:
                    k = np.searchsorted(s, r + eps, side="right") - np.searchsorted(s, r - eps, side="left")
                    est = k / s.size
                    se = math.sqrt(est * (1.0 - est) / s.size)
                w = r**m if m > 0 else 1.0
                bound = phi * eps
                rep.rows.append(dict(cov_id=rep.cov_id, check=f"anticonc_m{m:g}", r=r, eps=eps, estimate=w * est,
                                     se=w * se, bound=bound, **{"pass": w * est <= bound + 3 * w * se}))
    return rep
