"""Multiplier empirical process over half-line indicators on [0, 1].

Z_n = sup_u |n^{-1/2} sum_i xi_i 1{X_i > u}|.  Sorting X in decreasing
order turns the sup into a running max of partial sums, so every
replicate is exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rng as _rng
from ._kernels import halfline_sup

XI_DISTS = ("normal", "student_t3", "zero")


@dataclass(frozen=True)
class FunctionClassSpec:
    kind: str = "halfline"
    vc_dim: int = 1
    u_grid: tuple = tuple(np.linspace(0.0, 1.0, 11))

    def __post_init__(self):
        if self.kind != "halfline":
            raise ValueError("only the half-line class is supported")
        if self.vc_dim != 1:
            raise ValueError("half-lines have weak VC-major dimension 1")

    def traces(self, x: np.ndarray) -> int:
        """Number of distinct sets {i : x_i > u} as u ranges over the reals."""
        return int(np.unique(x).size) + 1

    def entropy_ok(self, x: np.ndarray) -> bool:
        n = x.size
        t = self.traces(x)
        d = self.vc_dim
        return t <= n + 1 and math.log(t) <= d * math.log(2 * math.e * n / d) + 1e-12


def _xi(dist: str, g, shape) -> np.ndarray:
    if dist == "normal":
        return g.standard_normal(shape)
    if dist == "student_t3":
        # unit variance; only moments below 3 are finite
        return g.standard_t(3, shape) / math.sqrt(3.0)
    if dist == "zero":
        return np.zeros(shape)
    raise ValueError(f"unknown xi_dist {dist!r}; choose from {XI_DISTS}")


def _block_sup(n: int, b: int, g, dist: str, sigma_fn=None) -> np.ndarray:
    x = g.random((b, n))
    xi = _xi(dist, g, (b, n))
    if sigma_fn is not None:
        xi = xi * sigma_fn(x)
    return halfline_sup(x, xi) / math.sqrt(n)


def sample_Zn(n: int, xi_dist: str = "normal", reps: int = 10_000, seed: int = 0, workers=None) -> np.ndarray:
    exp = f"empproc:Zn:n={n}:{xi_dist}"
    return _rng.concat_blocks(lambda g, b: _block_sup(n, b, g, xi_dist), reps, seed, exp, workers=workers)


def _mean_se(v: np.ndarray):
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0


def estimate_Zn(n: int, xi_dist: str = "normal", reps: int = 10_000, seed: int = 0, workers=None):
    """(E Z_n estimate, se) with X_i uniform on [0, 1]."""
    if n < 1 or reps < 2:
        raise ValueError("need n >= 1 and reps >= 2")
    return _mean_se(sample_Zn(n, xi_dist, reps, seed, workers))


def gaussian_width_bound(n: int, sigma_fn=None, reps: int = 10_000, seed: int = 0, workers=None,
                         spec: FunctionClassSpec | None = None):
    """(u-integrated Gaussian width, se) for multipliers g_i sigma(X_i).

    For half-lines the conditional width does not depend on u, so the
    trapezoid over u_grid (total length 1) equals the width itself; it is
    computed once.
    """
    spec = spec or FunctionClassSpec()
    sig = sigma_fn if sigma_fn is not None else (lambda x: np.ones_like(x))
    exp = f"empproc:width:n={n}"
    w = _rng.concat_blocks(lambda g, b: _block_sup(n, b, g, "normal", sig), reps, seed, exp, workers=workers)
    width, se = _mean_se(w)
    u = np.asarray(spec.u_grid)
    scale = float(u[-1] - u[0])  # trapezoid of a constant integrand
    return width * scale, se * scale


def entropy_audit(n: int, reps: int = 100, seed: int = 0, spec: FunctionClassSpec | None = None) -> bool:
    spec = spec or FunctionClassSpec()
    g = _rng.stream(seed, f"empproc:entropy:n={n}")
    return all(spec.entropy_ok(g.random(n)) for _ in range(reps))
