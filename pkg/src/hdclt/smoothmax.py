"""Smooth approximation of the indicator of an l_inf ball.

phi(x) = g0(2 (F_beta(z_x - r) - eps/2) / eps) with z_x = (x, -x), F_beta the
log-sum-exp softmax at inverse temperature beta = 2 log(2p) / eps and g0 a
quintic bump that falls from 1 to 0 on [0, 1].
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .constants import DEFAULT_C0, DEFAULT_FRAKC

# sup |g0'| = 30 * max t^2 (1-t)^2 = 30 / 16
G1_SUP = 30.0 / 16.0
SCHEMA_VERSION = "1"


@dataclass(frozen=True)
class SmoothMaxParams:
    r: float
    eps: float
    p: int
    beta: float = field(init=False)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.r < 0:
            raise ValueError("r must be nonnegative")
        object.__setattr__(self, "beta", 2.0 * math.log(2.0 * self.p) / self.eps)


def f_beta(z, beta):
    """(1/beta) log sum exp(beta z) along the last axis, shifted by the max.

    beta may be a scalar or an array broadcasting against z.shape[:-1].
    """
    z = np.asarray(z, dtype=np.float64)
    beta = np.asarray(beta, dtype=np.float64)
    zmax = z.max(axis=-1)
    s = np.exp(beta[..., None] * (z - zmax[..., None])).sum(axis=-1)
    return zmax + np.log(s) / beta


def g0(t):
    t = np.asarray(t, dtype=np.float64)
    u = np.clip(t, 0.0, 1.0)
    # 1 - 10u^3 + 15u^4 - 6u^5 in Horner form
    return 1.0 + u**3 * (-10.0 + u * (15.0 - 6.0 * u))


def g0_prime(t):
    t = np.asarray(t, dtype=np.float64)
    u = np.clip(t, 0.0, 1.0)
    return -30.0 * u * u * (1.0 - u) ** 2


def _zx(x):
    x = np.asarray(x, dtype=np.float64)
    return np.concatenate([x, -x], axis=-1)


def _t(x, prm: SmoothMaxParams):
    return 2.0 * (f_beta(_zx(x) - prm.r, prm.beta) - prm.eps / 2.0) / prm.eps


def phi_r_eps(x, params: SmoothMaxParams):
    """phi_{r,eps}(x) for a vector or a stack of row vectors."""
    return g0(_t(x, params))


def softmax_weights(x, beta):
    z = _zx(x)
    e = np.exp(beta * (z - z.max(axis=-1, keepdims=True)))
    return e / e.sum(axis=-1, keepdims=True)


def gradient(x, params: SmoothMaxParams):
    """Analytic gradient: g0'(t) (2/eps) (w_j - w_{p+j})."""
    x = np.asarray(x, dtype=np.float64)
    w = softmax_weights(x, params.beta)
    p = x.shape[-1]
    q = w[..., :p] - w[..., p:]
    return g0_prime(_t(x, params))[..., None] * (2.0 / params.eps) * q


def envelope(x, params: SmoothMaxParams, gamma: float = 1.0):
    """First-derivative envelope D_j(x) >= |d_j phi(x)| for every x.

    gamma = 1 gives sup|g0'| (2/eps) (w_j + w_{p+j}), whose sum is
    3.75/eps.  gamma < 1 raises the pair weights to the power gamma; the
    result still dominates |d_j phi| and has log-ratio under a shift w of at
    most 2 gamma beta ||w||, at the price of a larger sum (up to p^{1-gamma}).
    """
    x = np.asarray(x, dtype=np.float64)
    w = softmax_weights(x, params.beta)
    p = x.shape[-1]
    s = w[..., :p] + w[..., p:]
    return G1_SUP * (2.0 / params.eps) * s**gamma


def log_ep(p):
    return math.log(math.e * p)


# sup |g0''| = 60 max t(1-t)(1-2t) = 10/sqrt(3); sup |g0'''| = 60, reached at the seams
G2_SUP = 10.0 / math.sqrt(3.0)
G3_SUP = 60.0


def analytic_sum_bounds(p: int) -> dict:
    """Provable bounds on eps^k * (k-th derivative sum), k = 1, 2, 3.

    With t the g0 argument, sum|t_j| <= 2/eps, sum|t_jk| <= (2/eps) 2 beta and
    sum|t_jkl| <= (2/eps) 6 beta^2 (softmax Hessian and third-derivative sums),
    and beta eps = 2 log(2p).
    """
    L = math.log(2.0 * p)
    return {
        "d1": 2.0 * G1_SUP,
        "d2": 4.0 * G2_SUP + 8.0 * L * G1_SUP,
        "d3": 8.0 * G3_SUP + 48.0 * L * G2_SUP + 48.0 * L * L * G1_SUP,
    }


def provable_C0(p: int) -> float:
    """Smallest C0 the analytic bounds certify at dimension p."""
    b = analytic_sum_bounds(p)
    lp = log_ep(p)
    return max(b["d1"], b["d2"] / lp, b["d3"] / lp**2)


def envelope_hull_lower_bound(x, params: SmoothMaxParams, frakC: float, witnesses) -> float:
    """Lower bound on sum_j D_j(x) for ANY envelope with stability constant frakC.

    Stability over all shifts forces D_j(x) >= |d_j phi(y)| exp(-kappa ||x-y||)
    with kappa = frakC log(ep)/eps, for every y.  ``witnesses`` is an iterable
    of (j, y) pairs; the best witness per coordinate is summed.
    """
    x = np.asarray(x, dtype=np.float64)
    kappa = frakC * log_ep(params.p) / params.eps
    best = np.abs(gradient(x, params))
    for j, y in witnesses:
        y = np.asarray(y, dtype=np.float64)
        v = abs(gradient(y, params)[j]) * math.exp(-kappa * float(np.abs(x - y).max()))
        best[j] = max(best[j], v)
    return float(best.sum())


def stability_frakC(p: int, gamma: float = 1.0) -> float:
    """Smallest frakC the envelope provably satisfies: 4 gamma log(2p) / log(ep)."""
    return 4.0 * gamma * math.log(2.0 * p) / log_ep(p)


# ---------------------------------------------------------------- certification

CERT_HEADER = ("schema_version", "sample_id", "quantity", "observed", "bound", "pass")


@dataclass
class Certification:
    kind: str
    params: SmoothMaxParams
    constant: float
    rows: list = field(default_factory=list)
    max_ratio: dict = field(default_factory=dict)
    skipped: int = 0
    method: dict = field(default_factory=dict)

    @property
    def violations(self) -> int:
        return sum(1 for r in self.rows if not r[4])

    @property
    def passed(self) -> bool:
        return self.violations == 0

    def to_csv(self, only_worst: bool = False) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CERT_HEADER)
        for sid, qty, obs, bound, ok in self.rows:
            w.writerow([SCHEMA_VERSION, sid, qty, repr(float(obs)), repr(float(bound)), str(bool(ok)).lower()])
        return buf.getvalue()

    def summary(self) -> dict:
        return {
            "kind": self.kind,
            "r": self.params.r,
            "eps": self.params.eps,
            "p": self.params.p,
            "constant": self.constant,
            "n_rows": len(self.rows),
            "violations": self.violations,
            "skipped": self.skipped,
            "max_ratio": self.max_ratio,
            "method": self.method,
        }


def _band_points(params: SmoothMaxParams, g: np.random.Generator, k: int) -> np.ndarray:
    """Random points whose sup-norm lands in [r - eps, r + 2 eps]."""
    p = params.p
    x = g.uniform(-1.0, 1.0, size=(k, p))
    target = g.uniform(max(params.r - params.eps, 0.0), params.r + 2.0 * params.eps, size=k)
    m = np.abs(x).max(axis=1)
    m[m == 0] = 1.0
    return x * (target / m)[:, None]


def _hessian_sum(x, params, h, cols):
    """Sum over j and sampled columns k of |d_jk phi| by differencing the gradient."""
    total = 0.0
    for k in cols:
        e = np.zeros_like(x)
        e[k] = h
        total += np.abs((gradient(x + e, params) - gradient(x - e, params)) / (2.0 * h)).sum()
    return total


def _third_sum(x, params, h, pairs):
    total = 0.0
    for k, l in pairs:
        ek = np.zeros_like(x)
        el = np.zeros_like(x)
        ek[k] = h
        el[l] = h
        d = gradient(x + ek + el, params) - gradient(x + ek - el, params) - gradient(x - ek + el, params) + gradient(x - ek - el, params)
        total += np.abs(d / (4.0 * h * h)).sum()
    return total


def certify_derivative_bounds(params: SmoothMaxParams, C0: float = DEFAULT_C0, samples: int = 1000, seed: int = 0,
                              max_index_samples: int = 64, exact_upto: int = 8) -> Certification:
    """Compare eps-scaled derivative sums with C0, C0 log(ep), C0 log^2(ep).

    First derivatives are analytic.  Second and third derivative sums come
    from central differences of the analytic gradient; for p <= exact_upto all
    index pairs are enumerated, otherwise columns / pairs are sampled
    uniformly and the partial sum is scaled by the sampling fraction.
    """
    if samples < 100:
        raise ValueError("samples must be >= 100")
    p, eps = params.p, params.eps
    h2 = 1e-5 * eps / (1.0 + params.beta * eps)
    h3 = 1e-3 * eps / (1.0 + params.beta * eps)
    scale = max(1.0, params.r + 2.0 * eps)
    if h2 < 1e-11 * scale:
        raise ValueError(f"finite-difference step {h2:g} underflows relative to |x| ~ {scale:g}; eps too small")
    g = _rng.stream(seed, f"smoothmax:deriv:p={p}")
    xs = _band_points(params, g, samples)
    lp = log_ep(p)
    bounds = {"d1": C0 / eps, "d2": C0 * lp / eps**2, "d3": C0 * lp**2 / eps**3}
    exact = p <= exact_upto
    cert = Certification("derivatives", params, C0, method={"d1": "analytic", "d2": "exact_fd" if exact else "subsampled_fd",
                                                              "d3": "exact_fd" if exact else "subsampled_fd"})
    worst = {"d1": 0.0, "d2": 0.0, "d3": 0.0}
    for i, x in enumerate(xs):
        d1 = float(np.abs(gradient(x, params)).sum())
        if exact:
            cols = range(p)
            pairs = [(k, l) for k in range(p) for l in range(p)]
            f2 = 1.0
            f3 = 1.0
        else:
            kc = min(p, max_index_samples)
            cols = g.choice(p, size=kc, replace=False)
            k = g.integers(0, p, max_index_samples)
            l = (k + g.integers(1, p, max_index_samples)) % p
            pairs = list(zip(k, l))
            f2 = p / kc
            f3 = p * (p - 1) / len(pairs)
        d2 = f2 * _hessian_sum(x, params, h2, cols)
        if exact:
            d3 = _third_sum(x, params, h3, pairs)
        else:
            # diagonal pairs carry most of the mass and are summed exactly
            d3 = _third_sum(x, params, h3, [(j, j) for j in range(p)]) + f3 * _third_sum(x, params, h3, pairs)
        for q, v in (("d1", d1), ("d2", d2), ("d3", d3)):
            cert.rows.append((i, q, v, bounds[q], v <= bounds[q]))
            worst[q] = max(worst[q], v / bounds[q])
    cert.max_ratio = worst
    return cert


def certify_stability(params: SmoothMaxParams, frakC: float = DEFAULT_FRAKC, pairs: int = 10_000, seed: int = 0,
                      gamma: float = 1.0, floor: float = 1e-12) -> Certification:
    """Check exp(-frakC log(ep) ||w||/eps) <= D_j(x+w)/D_j(x) <= exp(+...).

    x is drawn near the transition band and w uniformly in the box
    ||w||_inf <= eps/log(ep).  Coordinates with D_j(x) below ``floor`` times
    the largest D are ignored; samples with none left are counted as skipped.
    max_ratio["frakC_needed"] is the smallest frakC that would have passed.
    """
    if pairs < 100:
        raise ValueError("pairs must be >= 100")
    p, eps = params.p, params.eps
    lp = log_ep(p)
    g = _rng.stream(seed, f"smoothmax:stability:p={p}")
    x = _band_points(params, g, pairs)
    radius = eps / lp * g.uniform(0.0, 1.0, size=pairs)
    w = g.uniform(-1.0, 1.0, size=(pairs, p))
    wn = np.abs(w).max(axis=1)
    wn[wn == 0] = 1.0
    w = w * (radius / wn)[:, None]
    d0 = envelope(x, params, gamma)
    d1 = envelope(x + w, params, gamma)
    cert = Certification("stability", params, frakC, method={"envelope": "softmax_pair", "gamma": gamma})
    needed = 0.0
    for i in range(pairs):
        keep = d0[i] > floor * d0[i].max()
        if not keep.any():
            cert.skipped += 1
            continue
        wnorm = float(np.abs(w[i]).max())
        lr = float(np.abs(np.log(d1[i, keep] / d0[i, keep])).max())
        allowed = frakC * lp * wnorm / eps
        if wnorm > 0:
            needed = max(needed, lr * eps / (lp * wnorm))
        # relative tolerance covers rounding in the log of nearly equal numbers
        cert.rows.append((i, "log_ratio", lr, allowed, lr <= allowed * (1.0 + 1e-9) + 1e-12))
    cert.max_ratio = {"frakC_needed": needed, "frakC_provable": stability_frakC(p, gamma)}
    return cert
