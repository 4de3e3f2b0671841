"""Sampleable distribution families in R^p and their pseudo-moment bounds.

A family is a base law for the standardized coordinates (mean zero, unit
variance, iid) pushed through a linear map ``A`` with ``A A^T = Sigma``.
Moments taken against the variation measure of ``law(X) - law(Y)`` are
bounded by the sum of the two laws, so every reported pseudo-moment is an
upper bound, never an exact value.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import integrate, optimize, special, stats

from . import rng as _rng
from ._kernels import rowmax_abs

BASES = ("gaussian", "rademacher", "subweibull", "laplace", "student_t")

# draws used for Monte Carlo pseudo-moments when no quadrature route exists
MC_MOMENT_DRAWS = 200_000


class MomentDivergenceError(ValueError):
    pass


class CovarianceError(ValueError):
    pass


# ---------------------------------------------------------------- covariance

@dataclass(frozen=True)
class CovarianceSpec:
    """Covariance of X in one of three parametrizations.

    ``kind`` is ``"diagonal"`` (params: variances), ``"equicorrelated"``
    (params: rho, sigma2, p) or ``"dense"`` (params: row-major matrix
    entries plus p).
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in ("diagonal", "equicorrelated", "dense"):
            raise CovarianceError(f"unknown covariance kind {self.kind!r}")
        if self.kind == "equicorrelated":
            rho, s2, p = self.params
            if not 0.0 <= rho < 1.0:
                raise CovarianceError(f"equicorrelated rho must lie in [0, 1), got {rho}")
            if s2 <= 0 or int(p) < 1:
                raise CovarianceError("equicorrelated needs sigma2 > 0 and p >= 1")
        self.factor  # validates positive definiteness eagerly

    @classmethod
    def diagonal(cls, variances: Iterable[float]) -> "CovarianceSpec":
        v = tuple(float(x) for x in variances)
        if not v:
            raise CovarianceError("need at least one coordinate")
        return cls("diagonal", v)

    @classmethod
    def identity(cls, p: int) -> "CovarianceSpec":
        return cls.diagonal([1.0] * int(p))

    @classmethod
    def equicorrelated(cls, rho: float, sigma2: float, p: int) -> "CovarianceSpec":
        return cls("equicorrelated", (float(rho), float(sigma2), int(p)))

    @classmethod
    def dense(cls, matrix) -> "CovarianceSpec":
        m = np.asarray(matrix, dtype=np.float64)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise CovarianceError(f"dense covariance must be square, got shape {m.shape}")
        if not np.allclose(m, m.T, rtol=0, atol=1e-12 * max(1.0, np.abs(m).max())):
            raise CovarianceError("dense covariance must be symmetric")
        return cls("dense", tuple(m.ravel().tolist()) + (m.shape[0],))

    @property
    def p(self) -> int:
        if self.kind == "diagonal":
            return len(self.params)
        return int(self.params[-1])

    @property
    def is_diagonal(self) -> bool:
        return self.kind == "diagonal" or (self.kind == "equicorrelated" and self.params[0] == 0.0)

    @cached_property
    def matrix(self) -> np.ndarray:
        if self.kind == "diagonal":
            return np.diag(np.array(self.params))
        if self.kind == "equicorrelated":
            rho, s2, p = self.params
            p = int(p)
            return s2 * ((1.0 - rho) * np.eye(p) + rho * np.ones((p, p)))
        p = int(self.params[-1])
        return np.array(self.params[:-1], dtype=np.float64).reshape(p, p)

    @cached_property
    def variances(self) -> np.ndarray:
        if self.kind == "diagonal":
            return np.array(self.params)
        return np.diag(self.matrix).copy()

    @property
    def sigma_min(self) -> float:
        return float(np.sqrt(self.variances.min()))

    @property
    def sigma_max(self) -> float:
        return float(np.sqrt(self.variances.max()))

    @cached_property
    def factor(self) -> np.ndarray:
        """Lower-triangular L with L L^T = Sigma (Cholesky)."""
        if self.kind == "diagonal":
            v = np.array(self.params)
            bad = np.flatnonzero(~(v > 0))
            if bad.size:
                raise CovarianceError(
                    f"covariance not positive definite: leading minor {bad[0] + 1} is nonpositive"
                )
            return np.diag(np.sqrt(v))
        m = self.matrix
        try:
            return np.linalg.cholesky(m)
        except np.linalg.LinAlgError:
            for k in range(1, m.shape[0] + 1):
                if np.linalg.eigvalsh(m[:k, :k]).min() <= 0:
                    raise CovarianceError(
                        f"covariance not positive definite: leading minor {k} is nonpositive"
                    ) from None
            raise CovarianceError("covariance not positive definite") from None

    def apply(self, z: np.ndarray) -> np.ndarray:
        """Map standardized rows ``z`` (k x p) to rows with this covariance."""
        if self.kind == "diagonal":
            return z * np.sqrt(self.variances)
        return z @ self.factor.T

    def to_config(self) -> dict:
        if self.kind == "diagonal":
            return {"kind": "diagonal", "params": {"variances": list(self.params)}}
        if self.kind == "equicorrelated":
            rho, s2, p = self.params
            return {"kind": "equicorrelated", "params": {"rho": rho, "sigma2": s2, "p": int(p)}}
        return {"kind": "dense", "params": {"matrix": self.matrix.tolist()}}

    @classmethod
    def from_config(cls, cfg: Mapping) -> "CovarianceSpec":
        kind = cfg["kind"]
        prm = cfg.get("params", {})
        if kind == "diagonal":
            return cls.diagonal(prm["variances"])
        if kind == "identity":
            return cls.identity(prm["p"])
        if kind == "equicorrelated":
            return cls.equicorrelated(prm["rho"], prm.get("sigma2", 1.0), prm["p"])
        if kind == "dense":
            return cls.dense(prm["matrix"])
        raise CovarianceError(f"unknown covariance kind {kind!r}")


# ---------------------------------------------------------------- base laws

def _subweibull_scale(alpha: float) -> float:
    # standard deviation of s * E^{1/alpha}
    return math.sqrt(math.gamma(1.0 + 2.0 / alpha))


def standard_coords(base: str, rng: np.random.Generator, shape, alpha=None, df=None) -> np.ndarray:
    """iid standardized (mean 0, variance 1) coordinates of the base law."""
    if base == "gaussian":
        return rng.standard_normal(shape)
    if base == "rademacher":
        return rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
    if base == "laplace":
        return rng.laplace(0.0, 1.0 / math.sqrt(2.0), size=shape)
    if base == "subweibull":
        e = rng.standard_exponential(shape)
        s = rng.integers(0, 2, size=shape).astype(np.float64) * 2.0 - 1.0
        return s * e ** (1.0 / alpha) / _subweibull_scale(alpha)
    if base == "student_t":
        return rng.standard_t(df, size=shape) * math.sqrt((df - 2.0) / df)
    raise ValueError(f"unknown base {base!r}")


def abs_moment(base: str, q: float, alpha=None, df=None) -> float:
    """E|Z|^q for a standardized coordinate of the base law."""
    if q < 0:
        raise ValueError("q must be nonnegative")
    if base == "gaussian":
        return 2.0 ** (q / 2.0) * math.gamma((q + 1.0) / 2.0) / math.sqrt(math.pi)
    if base == "rademacher":
        return 1.0
    if base == "laplace":
        return math.gamma(q + 1.0) * (1.0 / math.sqrt(2.0)) ** q
    if base == "subweibull":
        return math.gamma(1.0 + q / alpha) / _subweibull_scale(alpha) ** q
    if base == "student_t":
        if q >= df:
            raise MomentDivergenceError(f"moment q={q} diverges for student_t(df={df})")
        scale = math.sqrt((df - 2.0) / df)
        lg = (
            special.gammaln((q + 1.0) / 2.0)
            + special.gammaln((df - q) / 2.0)
            - special.gammaln(df / 2.0)
            - 0.5 * math.log(math.pi)
        )
        return scale**q * df ** (q / 2.0) * math.exp(lg)
    raise ValueError(f"unknown base {base!r}")


def abs_sf(base: str, t, alpha=None, df=None):
    """P(|Z| > t) for a standardized coordinate, vectorized in t >= 0."""
    t = np.asarray(t, dtype=np.float64)
    if base == "gaussian":
        return special.erfc(t / math.sqrt(2.0))
    if base == "rademacher":
        return (t < 1.0).astype(np.float64)
    if base == "laplace":
        return np.exp(-math.sqrt(2.0) * t)
    if base == "subweibull":
        return np.exp(-((t * _subweibull_scale(alpha)) ** alpha))
    if base == "student_t":
        scale = math.sqrt((df - 2.0) / df)
        return 2.0 * stats.t.sf(t / scale, df)
    raise ValueError(f"unknown base {base!r}")


def psi_norm(base: str, orlicz_alpha: float, alpha=None, df=None) -> float:
    """Orlicz psi_alpha norm inf{c : E exp((|Z|/c)^a) <= 2} of a standardized coordinate."""
    a = float(orlicz_alpha)
    if a <= 0:
        raise ValueError("Orlicz exponent must be positive")
    if base == "rademacher":
        return math.log(2.0) ** (-1.0 / a)
    if base == "gaussian" and a == 2.0:
        return math.sqrt(8.0 / 3.0)
    if base == "student_t":
        return math.inf
    tail_a = {"gaussian": 2.0, "laplace": 1.0, "subweibull": alpha}[base]
    if a > tail_a:
        return math.inf
    if base == "subweibull" and a == alpha:
        return 2.0 ** (1.0 / a) / _subweibull_scale(alpha)
    if base == "laplace" and a == 1.0:
        return math.sqrt(2.0)

    def excess(c):
        # E exp((|Z|/c)^a) - 1 = int_0^inf d/dt[exp((t/c)^a)] P(|Z| > t) dt
        f = lambda t: math.exp((t / c) ** a) * a * (t / c) ** (a - 1.0) / c * float(abs_sf(base, t, alpha, df))
        val, _ = integrate.quad(f, 0.0, np.inf, limit=200)
        return val - 1.0

    lo = 0.5
    while excess(lo) < 0:
        lo /= 2.0
    hi = 1.0
    while not np.isfinite(excess(hi)) or excess(hi) > 0:
        hi *= 2.0
    return optimize.brentq(excess, lo, hi, xtol=1e-12)


# ---------------------------------------------------------------- families

@dataclass(frozen=True)
class DistributionFamily:
    """Law of X_i: iid standardized base coordinates mapped to ``cov``.

    The same law is used for every i = 1..n.
    """

    base: str
    cov: CovarianceSpec
    alpha: float | None = None
    df: float | None = None

    def __post_init__(self):
        if self.base not in BASES:
            raise ValueError(f"unknown base {self.base!r}; choose from {BASES}")
        if self.base == "subweibull":
            if self.alpha is None or not 0.0 < self.alpha <= 2.0:
                raise ValueError(f"subweibull needs alpha in (0, 2], got {self.alpha}")
        if self.base == "student_t":
            if self.df is None or not self.df > 2.0:
                raise ValueError(f"student_t needs df > 2, got {self.df}")

    @property
    def p(self) -> int:
        return self.cov.p

    @property
    def family_id(self) -> str:
        extra = ""
        if self.base == "subweibull":
            extra = f"({self.alpha:g})"
        elif self.base == "student_t":
            extra = f"({self.df:g})"
        return f"{self.base}{extra}/{self.cov.kind}/p={self.p}"

    def coords(self, rng: np.random.Generator, shape) -> np.ndarray:
        return standard_coords(self.base, rng, shape, self.alpha, self.df)

    def draw(self, rng: np.random.Generator, k: int) -> np.ndarray:
        return self.cov.apply(self.coords(rng, (k, self.p)))

    def coord_sum(self, rng: np.random.Generator, n: int, k: int, method: str = "auto") -> np.ndarray:
        """k rows of sum_{i<=n} Z_i for standardized coordinates Z_i (unscaled).

        ``method="auto"`` samples the sum's exact law directly where the base
        allows it (binomial for signs, gamma differences for the exponential
        families); ``"direct"`` adds n draws one at a time.
        """
        p = self.p
        if n == 0:
            return np.zeros((k, p))
        if method == "auto":
            if self.base == "gaussian":
                return math.sqrt(n) * rng.standard_normal((k, p))
            if self.base == "rademacher":
                return 2.0 * rng.binomial(n, 0.5, size=(k, p)).astype(np.float64) - n
            if self.base == "laplace":
                return (rng.standard_gamma(n, (k, p)) - rng.standard_gamma(n, (k, p))) / math.sqrt(2.0)
            if self.base == "subweibull" and self.alpha == 1.0:
                pos = rng.binomial(n, 0.5, size=(k, p))
                return (_gamma0(rng, pos) - _gamma0(rng, n - pos)) / math.sqrt(2.0)
        elif method != "direct":
            raise ValueError(f"unknown method {method!r}")
        out = np.zeros((k, p))
        for _ in range(n):
            out += self.coords(rng, (k, p))
        return out

    def to_config(self) -> dict:
        return {
            "base": self.base,
            "alpha": self.alpha,
            "df": self.df,
            "p": self.p,
            "cov": self.cov.to_config(),
        }

    @classmethod
    def from_config(cls, cfg: Mapping) -> "DistributionFamily":
        cov_cfg = cfg.get("cov")
        if cov_cfg is None:
            cov = CovarianceSpec.identity(int(cfg["p"]))
        else:
            cov = CovarianceSpec.from_config(cov_cfg)
        if "p" in cfg and cfg["p"] is not None and int(cfg["p"]) != cov.p:
            raise ValueError(f"family p={cfg['p']} disagrees with covariance dimension {cov.p}")
        return cls(cfg["base"], cov, alpha=cfg.get("alpha"), df=cfg.get("df"))


def _gamma0(rng: np.random.Generator, shape_param: np.ndarray) -> np.ndarray:
    # Gamma(k, 1) with Gamma(0) := 0
    out = np.zeros(shape_param.shape)
    pos = shape_param > 0
    out[pos] = rng.standard_gamma(shape_param[pos].astype(np.float64))
    return out


def matched_gaussian(family: DistributionFamily) -> DistributionFamily:
    """Gaussian family with the same covariance as ``family``."""
    return DistributionFamily("gaussian", family.cov)


def sample_x(family: DistributionFamily, n: int, seed: int, workers: int | None = None) -> np.ndarray:
    """n independent rows from ``family``; deterministic in (family, n, seed)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    exp = "sample_x:" + family.family_id
    return _rng.concat_blocks(lambda g, k: family.draw(g, k), n, seed, exp, workers=workers)


def export_csv(x: np.ndarray, path=None) -> str:
    """CSV text with header x1..xp; written to ``path`` when given."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"x{j + 1}" for j in range(x.shape[1])])
    for row in x:
        w.writerow([repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


# ---------------------------------------------------------------- moments of ||X||

def _sup_sf(family: DistributionFamily, t) -> np.ndarray:
    """P(||X||_inf > t) for diagonal covariance (independent coordinates)."""
    t = np.atleast_1d(np.asarray(t, dtype=np.float64))
    sd = np.sqrt(family.cov.variances)
    sf = abs_sf(family.base, t[:, None] / sd[None, :], family.alpha, family.df)
    with np.errstate(divide="ignore"):
        logcdf = np.log1p(-np.minimum(sf, 1.0)).sum(axis=1)
    return -np.expm1(logcdf)


def _quad_tail(f, lo):
    val, _ = integrate.quad(f, lo, np.inf, limit=400, epsabs=1e-13, epsrel=1e-11)
    return val


class _NormLaw:
    """Moments of ||X||_inf for one family: quadrature or a frozen MC sample."""

    def __init__(self, family: DistributionFamily, seed: int = 0):
        self.family = family
        self.atom = family.base == "rademacher" and family.cov.is_diagonal
        self.quadrature = family.cov.is_diagonal
        self._sample = None
        self._seed = seed

    @property
    def method(self) -> str:
        if self.atom:
            return "closed_form"
        return "quadrature" if self.quadrature else "monte_carlo"

    @property
    def sample(self) -> np.ndarray:
        if self._sample is None:
            g = _rng.stream(self._seed, "norm_law:" + self.family.family_id)
            x = self.family.draw(g, MC_MOMENT_DRAWS)
            self._sample = rowmax_abs(x)
        return self._sample

    def _check_q(self, q):
        if self.family.base == "student_t" and q >= self.family.df:
            raise MomentDivergenceError(
                f"moment q={q} diverges for family {self.family.family_id} (df={self.family.df})"
            )

    def moment(self, q: float) -> tuple[float, float]:
        """(E||X||^q, standard error)."""
        self._check_q(q)
        if self.atom:
            return self.family.cov.sigma_max**q, 0.0
        if self.quadrature:
            f = lambda t: q * t ** (q - 1.0) * float(_sup_sf(self.family, t)[0])
            return _quad_tail(f, 0.0), 0.0
        v = self.sample**q
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))

    def truncated_second(self, u: float) -> tuple[float, float]:
        """(E||X||^2 1{||X|| >= u}, standard error)."""
        self._check_q(2.0)
        if self.atom:
            s = self.family.cov.sigma_max
            return (s * s if s >= u else 0.0), 0.0
        if self.quadrature:
            sf_u = float(_sup_sf(self.family, u)[0])
            f = lambda t: 2.0 * t * float(_sup_sf(self.family, t)[0])
            return u * u * sf_u + _quad_tail(f, u), 0.0
        v = np.where(self.sample >= u, self.sample**2, 0.0)
        return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def coordinate_abs_moment(family: DistributionFamily, q: float) -> tuple[float, float]:
    """(max_j E|X(j)|^q, standard error)."""
    if family.cov.is_diagonal or family.base == "gaussian":
        return family.cov.sigma_max**q * abs_moment(family.base, q, family.alpha, family.df), 0.0
    if family.base == "student_t" and q >= family.df:
        raise MomentDivergenceError(f"moment q={q} diverges for family {family.family_id}")
    g = _rng.stream(0, "coord_moment:" + family.family_id)
    x = np.abs(family.draw(g, MC_MOMENT_DRAWS)) ** q
    means = x.mean(axis=0)
    j = int(np.argmax(means))
    return float(means[j]), float(x[:, j].std(ddof=1) / math.sqrt(x.shape[0]))


@dataclass
class PseudoMomentReport:
    """Sum-of-laws upper bounds on the pseudo-moments of one family."""

    L_n: float
    M_n_of_phi: float
    Lbar_n0: float
    Lbar_nm: dict
    nu_q: dict
    L_q: dict
    method: str
    mc_se: float
    n: int
    phi: float
    mu: float
    sigma: float

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class PseudoMoments:
    """Lazy calculator for the pseudo-moments of a family and sample size.

    All values bound the variation-measure integrals by integrating against
    ``law(X) + law(Y)`` with Y the matched Gaussian.
    """

    def __init__(self, family: DistributionFamily, n: int, mu: float | None = None, seed: int = 0):
        if n < 1:
            raise ValueError("n must be >= 1")
        self.family = family
        self.gauss = matched_gaussian(family)
        self.n = int(n)
        self._x = _NormLaw(family, seed)
        self._y = _NormLaw(self.gauss, seed)
        self._mu = mu
        self.se = 0.0

    @property
    def log_ep(self) -> float:
        return math.log(math.e * self.family.p)

    @property
    def method(self) -> str:
        methods = {self._x.method, self._y.method}
        if not self.family.cov.is_diagonal:
            methods.add("monte_carlo")
        for tag in ("monte_carlo", "quadrature", "closed_form"):
            if tag in methods:
                return tag
        return "closed_form"

    @property
    def mu(self) -> float:
        if self._mu is None:
            from .gaussmax import estimate_summary

            self._mu = estimate_summary(self.family.cov, reps=100_000, seed=0).median_mu
        return self._mu

    @property
    def sigma(self) -> float:
        return self.family.cov.sigma_max

    def _acc(self, *pairs):
        total = 0.0
        for v, se in pairs:
            total += v
            self.se = max(self.se, se)
        return total

    def Lq(self, q: float) -> float:
        """max_j (E|X(j)|^q + E|Y(j)|^q)."""
        if self.family.cov.is_diagonal:
            s = self.family.cov.sigma_max**q
            f = self.family
            return s * (abs_moment(f.base, q, f.alpha, f.df) + abs_moment("gaussian", q))
        return self._acc(coordinate_abs_moment(self.family, q), coordinate_abs_moment(self.gauss, q))

    @property
    def L_n(self) -> float:
        return self.Lq(3.0)

    def M_n(self, phi: float) -> float:
        """Second moment of ||x|| over {||x|| >= sqrt(n) phi / log(ep)}."""
        if phi <= 0:
            raise ValueError("truncation scale phi must be positive")
        u = math.sqrt(self.n) * phi / self.log_ep
        return self._acc(self._x.truncated_second(u), self._y.truncated_second(u))

    def nu(self, q: float) -> float:
        """(E||X||^q + E||Y||^q)^{1/q}."""
        return self._acc(self._x.moment(q), self._y.moment(q)) ** (1.0 / q)

    def Lbar(self, m: float) -> float:
        mu, s = self.mu, self.sigma
        if m == 0:
            w = mu + s
        else:
            w = mu ** (m + 1) + s ** (m + 1) * ((m + 1) / math.e) ** ((m + 1) / 2.0)
        return w * self.L_n

    def report(self, m: float, phi: float, q_list: Sequence[float] = ()) -> PseudoMomentReport:
        nu = {float(q): self.nu(q) for q in q_list}
        lq = {float(q): self.Lq(q) for q in q_list}
        return PseudoMomentReport(
            L_n=self.L_n,
            M_n_of_phi=self.M_n(phi),
            Lbar_n0=self.Lbar(0),
            Lbar_nm={float(m): self.Lbar(m)},
            nu_q=nu,
            L_q=lq,
            method=self.method,
            mc_se=self.se,
            n=self.n,
            phi=float(phi),
            mu=self.mu,
            sigma=self.sigma,
        )


def pseudo_moments(
    family: DistributionFamily,
    m: float,
    phi: float,
    q_list: Sequence[float] = (),
    n: int = 1,
    mu: float | None = None,
) -> PseudoMomentReport:
    """Pseudo-moment report (upper bounds) for ``family`` at sample size ``n``."""
    return PseudoMoments(family, n, mu=mu).report(m, phi, q_list)


def orlicz_bound(K_p: float, alpha: float, p: int, q: float) -> float:
    """Upper bound on E||X||_inf^q when every coordinate has psi_alpha norm <= K_p."""
    if alpha <= 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    if q < 1:
        raise ValueError(f"q must be >= 1, got {q}")
    if K_p < 0:
        raise ValueError("K_p must be nonnegative")
    lp = math.log(p)
    inner = 2.0 ** (1.0 / q) * (6.0 * q / (math.e * alpha)) ** (1.0 / alpha) + 2.0 ** (1.0 / alpha) * lp ** (1.0 / alpha)
    return K_p**q * inner**q


def family_psi_norm(family: DistributionFamily, alpha: float) -> float:
    """K_p = max_j ||X(j)||_{psi_alpha}; diagonal covariance only."""
    if not family.cov.is_diagonal:
        raise ValueError("psi norms are only tabulated for diagonal covariance")
    return family.cov.sigma_max * psi_norm(family.base, alpha, family.alpha, family.df)
