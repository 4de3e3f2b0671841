"""Closed-form constants and rate bounds for the max-norm CLT.

Each ``rate_*`` function resolves its inputs (pseudo-moments may come as a
``PseudoMoments`` calculator, a ``PseudoMomentReport`` or a plain dict) into
a flat ``inputs_echo`` of scalars and then calls a pure evaluator on that
echo.  ``recompute`` runs the same evaluator again, so a bundle serialized
to JSON and read back reproduces its total to the last bit.

Universal constants that are only known to exist (C0, frakC, the Theta
family and the structural slack behind "up to a constant") are plain
keyword arguments with documented defaults and are always echoed.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

from scipy import optimize

DEFAULT_C0 = 716.0
DEFAULT_FRAKC = 4.0
DEFAULT_SLACK = 1.0
SCHEMA_VERSION = "1"


def log_ep(p: float) -> float:
    return math.log(math.e * p)


# ---------------------------------------------------------------- Gaussian-max constants

def phi2_value(mu: float, smin: float, smax: float) -> float:
    return max(51.0 * (mu + 4.1 * smax) / smin**2, 32.0 * math.pi * (mu + 2.6 * smin) ** 2 / smin**4)


def phi4_value(mu: float, smin: float, smax: float) -> float:
    a = 56.0 * (mu + 1.5 * smax) * (mu + 4.1 * smax) / (smax**2 * smin**2)
    b = 32.0 * math.pi * (2.6 * smin + mu) ** 2 * (smin**2 + 32.0 * smin * mu + 12.0 * mu**2) / smin**6
    return 1.0 + a + b


def K_lambda(lam: float, smin: float) -> float:
    return 2.0 / smin * (2.6 + lam / smin)


def _phi_ac_small_r(m: float, mu: float, smin: float, smax: float) -> float:
    return 3.0 ** (m + 1) * (mu + 2.0 * smax) ** (m + 1) / smin**2


def _tail_sup(m: float, r0: float, smax: float) -> tuple[float, float]:
    """sup_{r > r0} r^m (r+1) exp(-r^2 / (18 smax^2)) and its argmax.

    The log-derivative m/r + 1/(r+1) - r/(9 smax^2) is strictly decreasing,
    so the objective rises to a single critical point and falls after it.
    """
    s2 = 9.0 * smax * smax
    dlog = lambda r: m / r + 1.0 / (r + 1.0) - r / s2
    hi = max(1.0, 3.0 * smax)
    while dlog(hi) > 0:
        hi *= 2.0
    # dlog > 0 near 0 for every m >= 0, so the root is bracketed
    rstar = optimize.brentq(dlog, 1e-12, hi, xtol=1e-14, rtol=1e-15)
    r = max(rstar, r0)
    logv = (m * math.log(r) if m > 0 else 0.0) + math.log(r + 1.0) - r * r / (2.0 * s2)
    return math.exp(logv), r


def phi_ac_branches(m: float, mu: float, smin: float, smax: float) -> dict:
    b1 = _phi_ac_small_r(m, mu, smin, smax)
    r0 = 3.0 * (mu + smax)
    sup, rarg = _tail_sup(m, r0, smax)
    b2 = 2.0 * phi2_value(mu, smin, smax) * math.exp(-9.0 * (mu + smax) ** 2 / (32.0 * smax**2)) * sup
    return {"small_r": b1, "large_r": b2, "large_r_argmax": rarg, "value": max(b1, b2)}


def phi_ac_formula(m: float, mu: float, smin: float, smax: float, theta_m: float = 1.0) -> float:
    num = (mu + smax) ** (m + 1) * smax**2 + (1.0 + smax) ** 2 * smax ** (m + 2)
    return theta_m * num / smin**4


@dataclass(frozen=True)
class ConstantBundle:
    phi0: float
    phi1: float
    phi2: float
    phi3: float
    phi4: float
    phi_ac: dict
    inputs: tuple
    theta_policy: str
    branches: dict = field(default_factory=dict)

    def K_of(self, lam: float) -> float:
        return K_lambda(lam, self.inputs[1])

    def to_dict(self) -> dict:
        mu, smin, smax = self.inputs
        return {
            "schema_version": SCHEMA_VERSION,
            "mu": mu,
            "sigma_min": smin,
            "sigma_max": smax,
            "theta_policy": self.theta_policy,
            "phi0": self.phi0,
            "phi1": self.phi1,
            "phi2": self.phi2,
            "phi3": self.phi3,
            "phi4": self.phi4,
            "K0": self.K_of(0.0),
            "phi_ac": {str(k): v for k, v in self.phi_ac.items()},
            "phi_ac_branches": {str(k): v for k, v in self.branches.items()},
        }


def anticonc_constants(
    mu: float,
    sigma_min: float,
    sigma_max: float,
    m_list: Sequence[float] = (0,),
    theta_policy: str = "numeric",
    theta_m: float | Mapping = 1.0,
) -> ConstantBundle:
    """Evaluate the Gaussian-supremum constants at (mu, sigma_min, sigma_max)."""
    if not sigma_min > 0:
        raise ValueError(f"sigma_min must be positive, got {sigma_min}")
    if sigma_min > sigma_max:
        raise ValueError("sigma_min must not exceed sigma_max")
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    if theta_policy not in ("numeric", "formula"):
        raise ValueError(f"unknown theta_policy {theta_policy!r}")
    phi_ac = {}
    branches = {}
    for m in m_list:
        if m < 0:
            raise ValueError("m must be nonnegative")
        if theta_policy == "numeric":
            br = phi_ac_branches(m, mu, sigma_min, sigma_max)
            branches[m] = br
            phi_ac[m] = br["value"]
        else:
            th = theta_m[m] if isinstance(theta_m, Mapping) else theta_m
            phi_ac[m] = phi_ac_formula(m, mu, sigma_min, sigma_max, th)
    return ConstantBundle(
        phi0=1.0 / 6.0,
        phi1=1.0 / sigma_max**2,
        phi2=phi2_value(mu, sigma_min, sigma_max),
        phi3=20.0,
        phi4=phi4_value(mu, sigma_min, sigma_max),
        phi_ac=phi_ac,
        inputs=(float(mu), float(sigma_min), float(sigma_max)),
        theta_policy=theta_policy,
        branches=branches,
    )


# ---------------------------------------------------------------- pseudo-moment access

class PMView:
    """Uniform read access to pseudo-moments from any supported source."""

    def __init__(self, pm):
        self.pm = pm

    def _dict_get(self, key, *args):
        v = self.pm[key]
        if callable(v):
            return float(v(*args))
        if isinstance(v, Mapping):
            k = float(args[0])
            for kk, vv in v.items():
                if float(kk) == k:
                    return float(vv)
            raise KeyError(f"pseudo-moment {key} not supplied at {args[0]}")
        return float(v)

    def L_n(self) -> float:
        if isinstance(self.pm, Mapping):
            return self._dict_get("L_n")
        return float(self.pm.L_n)

    def M_n(self, phi: float) -> float:
        if isinstance(self.pm, Mapping):
            return self._dict_get("M_n", phi)
        if hasattr(self.pm, "M_n"):
            return float(self.pm.M_n(phi))
        # a frozen report bounds M_n(phi) for phi >= its own scale (M_n is nonincreasing)
        if phi >= self.pm.phi:
            return float(self.pm.M_n_of_phi)
        raise ValueError(
            f"report computed M_n at phi={self.pm.phi}, cannot bound M_n({phi}); pass a PseudoMoments calculator"
        )

    def Lbar(self, m: float) -> float:
        if isinstance(self.pm, Mapping):
            if m == 0 and "Lbar_n0" in self.pm:
                return self._dict_get("Lbar_n0")
            return self._dict_get("Lbar_nm", m)
        if hasattr(self.pm, "Lbar"):
            return float(self.pm.Lbar(m))
        if m == 0:
            return float(self.pm.Lbar_n0)
        return float(self.pm.Lbar_nm[float(m)])

    def nu(self, q: float) -> float:
        if isinstance(self.pm, Mapping):
            return self._dict_get("nu", q)
        if hasattr(self.pm, "nu"):
            return float(self.pm.nu(q))
        return float(self.pm.nu_q[float(q)])

    def Lq(self, q: float) -> float:
        if isinstance(self.pm, Mapping):
            return self._dict_get("L_q", q)
        if hasattr(self.pm, "Lq"):
            return float(self.pm.Lq(q))
        return float(self.pm.L_q[float(q)])


# ---------------------------------------------------------------- rate bundles

@dataclass
class Term:
    name: str
    value: float
    formula: str


@dataclass
class RateBundle:
    theorem: str
    terms: list
    total: float
    inputs_echo: dict
    validity: dict | None = None
    details: dict = field(default_factory=dict)

    @property
    def vacuous(self) -> bool:
        return self.total > 1.0

    def term(self, name: str) -> float:
        for t in self.terms:
            if t.name == name:
                return t.value
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "theorem": self.theorem,
            "terms": [{"name": t.name, "value": t.value, "formula": t.formula} for t in self.terms],
            "total": self.total,
            "vacuous": self.vacuous,
            "inputs_echo": dict(self.inputs_echo),
            "validity": self.validity,
            "details": self.details,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "RateBundle":
        terms = [Term(t["name"], t["value"], t["formula"]) for t in d["terms"]]
        return cls(d["theorem"], terms, d["total"], dict(d["inputs_echo"]), d.get("validity"), d.get("details", {}))


_EVAL: dict[str, Callable[[dict], tuple]] = {}


def _evaluator(tag):
    def deco(fn):
        _EVAL[tag] = fn
        return fn
    return deco


def _bundle(tag: str, echo: dict) -> RateBundle:
    terms, details, validity = _EVAL[tag](echo)
    total = 0.0
    for t in terms:
        total += t.value
    return RateBundle(tag, terms, total, echo, validity, details)


def recompute(bundle) -> float:
    """Re-evaluate a bundle (or its dict form) from its inputs_echo alone."""
    if isinstance(bundle, Mapping):
        bundle = RateBundle.from_dict(bundle)
    return _bundle(bundle.theorem, dict(bundle.inputs_echo)).total


def _common_checks(p, n, C0=None, frakC=None):
    if p < 1:
        raise ValueError("p must be >= 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    if C0 is not None and not C0 > 0:
        raise ValueError("C0 must be positive")
    if frakC is not None and frakC < 0:
        raise ValueError("frakC must be nonnegative")


def _eps_t31(L, lp, n, C0, frakC):
    return (2.0 * math.exp(2.0 * frakC) * C0 * lp**2 * L) ** (1.0 / 3.0) / n ** (1.0 / 6.0)


# T31 rate bundle ----------------------------------------------------------

@_evaluator("T31")
def _eval_t31(e):
    lp = log_ep(e["p"])
    eps = _eps_t31(e["L_n"], lp, e["n"], e["C0"], e["frakC"])
    t1 = 4.0 * e["phi_ac0"] * eps
    t2 = 2.0 * e["C0"] * lp * e["M_n_at_eps"] / eps**2
    t3 = lp ** (1.0 / 3.0) * e["Lbar_n0"] / (
        e["n"] ** (1.0 / 3.0) * e["L_n"] ** (4.0 / 3.0) * (2.0 * math.exp(5.0 * e["frakC"]) * e["C0"]) ** (1.0 / 3.0)
    )
    terms = [
        Term("anticoncentration", t1, "4*phi_ac0*eps_n"),
        Term("truncated_second", t2, "2*C0*log(ep)*M_n(eps_n)/eps_n^2"),
        Term("weighted_third", t3, "log(ep)^(1/3)*Lbar_n0/(n^(1/3)*L_n^(4/3)*(2*e^(5C)*C0)^(1/3))"),
    ]
    return terms, {"eps_n": eps}, None


def rate_uniform_t31(pm, p, n, C0=DEFAULT_C0, frakC=DEFAULT_FRAKC, phi_ac0=1.0) -> RateBundle:
    _common_checks(p, n, C0, frakC)
    v = PMView(pm)
    L = v.L_n()
    if not L > 0:
        raise ValueError("degenerate pseudo-moment: L_n must be positive")
    eps = _eps_t31(L, log_ep(p), n, C0, frakC)
    echo = dict(p=p, n=n, C0=C0, frakC=frakC, phi_ac0=phi_ac0, L_n=L, M_n_at_eps=v.M_n(eps), Lbar_n0=v.Lbar(0))
    return _bundle("T31", echo)


# Finite (2+tau)-moment rates ---------------------------------------------------

@_evaluator("E32")
def _eval_e32(e):
    lp = log_ep(e["p"])
    tau, n, phi, s = e["tau"], e["n"], e["phi_ac0"], e["slack"]
    t1 = s * phi * (lp**2 * e["L_n"]) ** (1.0 / 3.0) / n ** (1.0 / 6.0)
    t2 = s * (phi * e["nu"]) ** ((2.0 + tau) / (3.0 + tau)) * lp ** ((tau + 1.0) / (tau + 3.0)) / n ** (tau / (6.0 + 2.0 * tau))
    terms = [
        Term("main", t1, "slack*phi_ac0*(log(ep)^2*L_n)^(1/3)/n^(1/6)"),
        Term("moment", t2, "slack*(phi_ac0*nu_{2+tau})^((2+tau)/(3+tau))*log(ep)^((tau+1)/(tau+3))/n^(tau/(6+2tau))"),
    ]
    return terms, {"n_exponent": tau / (6.0 + 2.0 * tau)}, None


@_evaluator("APPA")
def _eval_appa(e):
    lp = log_ep(e["p"])
    tau, n, phi, s = e["tau"], e["n"], e["phi_ac0"], e["slack"]
    scale = lp ** ((tau + 1.0) / (tau + 2.0)) / n ** (tau / (6.0 + 2.0 * tau))
    t1 = s * phi * e["L_tau"] ** (1.0 / (2.0 + tau)) * scale
    t2 = s * (phi * e["nu"]) ** ((2.0 + tau) / (3.0 + tau)) * scale
    terms = [
        Term("coordinate_moment", t1, "slack*phi_ac0*L_{n,tau}^(1/(2+tau))*log(ep)^((tau+1)/(tau+2))/n^(tau/(6+2tau))"),
        Term("moment", t2, "slack*(phi_ac0*nu_{2+tau})^((2+tau)/(3+tau))*log(ep)^((tau+1)/(tau+2))/n^(tau/(6+2tau))"),
    ]
    return terms, {"n_exponent": tau / (6.0 + 2.0 * tau)}, None


def rate_finite_moment(pm, p, n, tau, m=0, phi_ac0=1.0, C0=DEFAULT_C0, frakC=DEFAULT_FRAKC, slack=DEFAULT_SLACK) -> RateBundle:
    """Uniform rate under 2+tau moments; tau >= 1 and tau < 1 use different displays."""
    _common_checks(p, n, C0, frakC)
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    if m != 0:
        raise ValueError("finite-moment rates are stated for m = 0")
    v = PMView(pm)
    q = 2.0 + tau
    echo = dict(p=p, n=n, tau=tau, m=m, phi_ac0=phi_ac0, C0=C0, frakC=frakC, slack=slack, nu=v.nu(q))
    if tau >= 1:
        echo["L_n"] = v.L_n()
        return _bundle("E32", echo)
    echo["L_tau"] = v.Lq(q)
    return _bundle("APPA", echo)


# Proposition 3.2 ---------------------------------------------------------------

@_evaluator("P32")
def _eval_p32(e):
    lp = log_ep(e["p"])
    t1 = 2.0 ** (1.0 - e["n"])
    t2 = 8.0 * e["phi_ac0"] * e["nu3"] * (e["C0"] * lp**2) ** (1.0 / 3.0) / e["n"] ** (1.0 / 6.0)
    return [Term("geometric", t1, "1/2^(n-1)"), Term("main", t2, "8*phi_ac0*nu_3*(C0*log(ep)^2)^(1/3)/n^(1/6)")], {}, None


def rate_prop32(nu3, p, n, phi_ac0=1.0, C0=DEFAULT_C0) -> RateBundle:
    _common_checks(p, n, C0)
    if isinstance(nu3, (int, float)):
        nu3 = float(nu3)
    else:
        nu3 = PMView(nu3).nu(3.0)
    if not math.isfinite(nu3) or nu3 < 0:
        raise ValueError("nu_3 must be finite and nonnegative")
    return _bundle("P32", dict(p=p, n=n, phi_ac0=phi_ac0, C0=C0, nu3=nu3))


# T33 rate bundle ----------------------------------------------------------

@_evaluator("T33")
def _eval_t33(e):
    lp = log_ep(e["p"])
    tau, n, phi, s = e["tau"], e["n"], e["phi_ac0"], e["slack"]
    t1 = s * 2.0 ** (-n)
    t2 = s * phi * (e["L_n"] ** 2 * lp**4 / n) ** (1.0 / 6.0)
    t3 = s * phi * e["nu"] * lp ** ((tau + 1.0) / (tau + 2.0)) / n ** (tau / (4.0 + 2.0 * tau))
    terms = [
        Term("geometric", t1, "slack*2^(-n)"),
        Term("main", t2, "slack*phi_ac0*(L_n^2*log(ep)^4/n)^(1/6)"),
        Term("moment", t3, "slack*phi_ac0*nu_{2+tau}*log(ep)^((tau+1)/(tau+2))/n^(tau/(4+2tau))"),
    ]
    return terms, {}, None


def rate_optimal_t33(pm, p, n, tau, phi_ac0=1.0, C0=DEFAULT_C0, slack=DEFAULT_SLACK) -> RateBundle:
    _common_checks(p, n, C0)
    if tau < 1:
        raise ValueError("tau < 1: this rate needs tau >= 1; use rate_finite_moment for the tau < 1 branch")
    v = PMView(pm)
    echo = dict(p=p, n=n, tau=tau, phi_ac0=phi_ac0, C0=C0, slack=slack, L_n=v.L_n(), nu=v.nu(2.0 + tau))
    return _bundle("T33", echo)


# T34 rate bundle ----------------------------------------------------------

@_evaluator("T34")
def _eval_t34(e):
    lp = log_ep(e["p"])
    m, n, C0, C, L = e["m"], e["n"], e["C0"], e["frakC"], e["L_n"]
    eps = _eps_t31(L, lp, n, C0, C)
    rm = e["r_nm"] ** m
    t1 = 2.0 ** (2.0 * m * m / 3.0 + 8.0 * m / 3.0 + 1.0) * eps ** (m + 1.0) * e["phi_ac0"]
    t2 = (2.0 ** (2.0 * m / 3.0 + 1.0) + 2.0) * e["phi_acm"] * eps
    t3 = 2.0 * C0 * lp * rm * e["M_n_at_scaled_eps"] / eps**2
    t4 = rm * e["Lbar_nm"] / (L * 2.0**m * math.exp(C)) * (
        lp / (n * 2.0 ** (2.0 * m + 1.0) * math.exp(2.0 * C) * C0 * L)
    ) ** ((m + 1.0) / 3.0)
    terms = [
        Term("anticoncentration0", t1, "2^(2m^2/3+8m/3+1)*eps_n^(m+1)*phi_ac0"),
        Term("anticoncentration_m", t2, "(2^(2m/3+1)+2)*phi_acm*eps_n"),
        Term("truncated_second", t3, "2*C0*log(ep)*r^m*eps_n^-2*M_n(2^(2m/3)*eps_n)"),
        Term("weighted_third", t4, "r^m*Lbar_nm/(L_n*2^m*e^C)*(log(ep)/(n*2^(2m+1)*e^(2C)*C0*L_n))^((m+1)/3)"),
        Term("tail", e["tail_sup"], "sup_{r>=r_nm} max_k r^m P(||U_nk||>=r) (supplied)"),
    ]
    return terms, {"eps_n": eps}, None


def rate_nonuniform_t34(pm, p, n, m, r_nm, tail_sup=None, phi_acm=1.0, phi_ac0=1.0, C0=DEFAULT_C0, frakC=DEFAULT_FRAKC) -> RateBundle:
    _common_checks(p, n, C0, frakC)
    if not m > 0 or not r_nm > 0:
        raise ValueError("m and r_nm must be positive")
    if tail_sup is None:
        raise ValueError("tail_sup is required: the tail of max_k ||U_nk|| beyond r_nm is problem specific")
    v = PMView(pm)
    L = v.L_n()
    if not L > 0:
        raise ValueError("degenerate pseudo-moment: L_n must be positive")
    eps = _eps_t31(L, log_ep(p), n, C0, frakC)
    echo = dict(
        p=p, n=n, m=m, r_nm=r_nm, tail_sup=float(tail_sup), phi_acm=phi_acm, phi_ac0=phi_ac0, C0=C0, frakC=frakC,
        L_n=L, Lbar_nm=v.Lbar(m), M_n_at_scaled_eps=v.M_n(2.0 ** (2.0 * m / 3.0) * eps),
    )
    return _bundle("T34", echo)


# T35 rate bundle ----------------------------------------------------------

def _t35_eps(L, nu, lp, n, m, tau, C0, C):
    e1 = (2.0 ** (2.0 + 1.5 * m) * C0 * math.exp(C) * L * lp**2) ** (1.0 / 3.0) / n ** (1.0 / 6.0)
    e2 = nu * (2.0 ** (3.0 + 2.5 * m) * C0 * lp ** (tau + 1.0)) ** (1.0 / (2.0 + tau)) / n ** (tau / (4.0 + 2.0 * tau))
    return e1, e2


def _geometric_nu(nu_m, m, n):
    # 2^{m/2} (nu_m / 2^{n/2})^m without overflow for large n
    if nu_m == 0:
        return 0.0
    return math.exp(m * math.log(2.0) / 2.0 + m * (math.log(nu_m) - n * math.log(2.0) / 2.0))


@_evaluator("T35")
def _eval_t35(e):
    lp = log_ep(e["p"])
    m = e["m"]
    e1, e2 = _t35_eps(e["L_n"], e["nu_tau"], lp, e["n"], m, e["tau"], e["C0"], e["frakC"])
    eps = max(e1, e2)
    terms = [
        Term("geometric", _geometric_nu(e["nu_m"], m, e["n"]), "2^(m/2)*(nu_m/2^(n/2))^m"),
        Term("power", 2.0 ** (2.0 + 2.0 * m) * eps**m, "2^(2+2m)*eps_n^m"),
        Term("anticoncentration_m", 2.4 * e["phi_acm"] * eps, "2.4*phi_acm*eps_n"),
    ]
    return terms, {"eps_n": eps, "eps_branch_third": e1, "eps_branch_moment": e2}, None


def rate_nonuniform_t35(pm, p, n, m, tau, phi_acm=1.0, C0=DEFAULT_C0, frakC=DEFAULT_FRAKC) -> RateBundle:
    _common_checks(p, n, C0, frakC)
    if m < 1:
        raise ValueError("m must be >= 1 (Fix m >= 1 and tau >= m)")
    if tau < m:
        raise ValueError(f"tau={tau} < m={m}: Fix m >= 1 and tau >= m")
    v = PMView(pm)
    echo = dict(p=p, n=n, m=m, tau=tau, phi_acm=phi_acm, C0=C0, frakC=frakC, L_n=v.L_n(), nu_m=v.nu(m), nu_tau=v.nu(2.0 + tau))
    return _bundle("T35", echo)


# Sub-Weibull corollaries -------------------------------------------------------

class GuardError(ValueError):
    pass


_SW_DEFAULTS = dict(phi_ac0=1.0, phi_acm=1.0, C0=DEFAULT_C0, frakC=DEFAULT_FRAKC, theta=1.0, theta_alpha=1.0, theta_m=1.0, theta_alpha_m=1.0)


def _sw_guards(e) -> list[str]:
    """Names of violated guard inequalities (empty if all hold)."""
    kind, a, n, K, lp = e["kind"], e["alpha"], e["n"], e["K_p"], log_ep(e["p"])
    bad = []
    if kind == "C36a":
        arg = n**1.5 / (K * e["theta_alpha"] * e["phi_ac0"] * lp ** (2.0 + 1.0 / a))
        if not math.log(arg) >= 4.0:
            bad.append("log(n^{3/2}/(K_p Theta_alpha phi_ac0 log(ep)^{2+1/alpha})) >= 4")
        if not e["theta_alpha"] / e["phi_ac0"] * n**1.5 / lp ** (2.0 + 1.0 / a) > 1.0:
            bad.append("Theta_alpha phi_ac0^{-1} n^{3/2}/log(ep)^{2+1/alpha} > 1")
    elif kind == "C36b":
        if not a * math.log(n / lp) >= 3.0:
            bad.append("alpha log(n/log(ep)) >= 3")
    elif kind in ("C37a", "C37b"):
        if kind == "C37a" and not 1.0 < a <= 2.0:
            bad.append("1 < alpha <= 2")
        if kind == "C37b" and not 0.0 < a <= 1.0:
            bad.append("0 < alpha <= 1")
        if not n >= e["theta"] * K**3 / e["L_n"] * (2.0 * math.e * lp) ** (1.0 + 3.0 / a):
            bad.append("n >= Theta K_p^3 L_n^{-1} (2e log(ep))^{1+3/alpha}")
    elif kind == "C37c":
        if e["m"] < 1:
            bad.append("m >= 1")
        if not a * math.log(2.0 ** (3.0 + 2.5 * e["m"]) * n / lp) >= e["m"] + 2.0:
            bad.append("alpha log(2^{3+5m/2} n/log(ep)) >= m+2")
    return bad


@_evaluator("C36")
def _eval_c36(e):
    kind, a, n, K, lp = e["kind"], e["alpha"], e["n"], e["K_p"], log_ep(e["p"])
    phi = e["phi_ac0"]
    main = e["theta"] * phi * (e["L_n"] * lp**2) ** (1.0 / 3.0) / n ** (1.0 / 6.0)
    if kind == "C36a":
        inner = e["theta_alpha"] / phi * n**1.5 / lp ** (2.0 + 1.0 / a)
        f = "Theta_alpha*K_p*phi_ac0*log(ep)^(1+1/alpha)/n^(1/2)*log^(1/alpha)(Theta_alpha*n^(3/2)/(phi_ac0*log(ep)^(2+1/alpha)))"
    else:
        inner = n / lp
        f = "Theta_alpha*K_p*phi_ac0*log(ep)^(1+1/alpha)/n^(1/2)*log^(1/alpha)(n/log(ep))"
    second = e["theta_alpha"] * K * phi * lp ** (1.0 + 1.0 / a) / math.sqrt(n) * math.log(inner) ** (1.0 / a)
    terms = [Term("main", main, "Theta*phi_ac0*(L_n*log(ep)^2)^(1/3)/n^(1/6)"), Term("tail", second, f)]
    return terms, {"kind": kind}, {"guards_ok": True}


@_evaluator("C37")
def _eval_c37(e):
    kind, a, n, K, lp, m = e["kind"], e["alpha"], e["n"], e["K_p"], log_ep(e["p"]), e["m"]
    L, smax = e["L_n"], e["sigma_max"]
    if kind == "C37c":
        e1 = (2.0 ** (2.0 + 1.5 * m) * e["C0"] * math.exp(e["frakC"]) * L * lp**2) ** (1.0 / 3.0) / n ** (1.0 / 6.0)
        e2 = e["theta_alpha_m"] * (math.e * a) ** (1.0 / a) * lp ** (1.0 + 1.0 / a) / math.sqrt(n) * math.log(2.0 * e["C0"] * n / lp) ** (1.0 / a)
        eps = max(e1, e2)
        terms = [
            Term("geometric", _geometric_nu(e["nu_m"], m, n), "2^(m/2)*(nu_m/2^(n/2))^m"),
            Term("power", 2.0 ** (2.0 + 2.0 * m) * eps**m, "2^(2+2m)*eps_n^m"),
            Term("anticoncentration_m", 2.4 * e["phi_acm"] * eps, "2.4*phi_acm*eps_n"),
        ]
        return terms, {"kind": kind, "eps_n": eps}, {"guards_ok": True}
    lepn = math.log(math.e * e["p"] * n)
    main = e["theta_m"] * e["phi_acm"] * (L**2 * lp**4 / n) ** (1.0 / 6.0)
    last = e["theta_m"] * K ** (m + 2.0) / (smax**2 * n ** (2.0 / 3.0))
    if kind == "C37a":
        t2 = e["theta_alpha_m"] * (K ** ((2.0 * m + 1.0) * a) * lepn**4 / (n * L ** ((m + 1.0) * a / 3.0))) ** (1.0 / (a - 1.0))
        t3 = e["theta_m"] * K**m * smax ** (m + 1.0) * (lepn**4 / (n * L)) ** ((m + 1.0) / 3.0)
        f2 = "Theta_alpha_m*(K_p^((2m+1)alpha)*log(epn)^4/(n*L_n^((m+1)alpha/3)))^(1/(alpha-1))"
        f3 = "Theta_m*K_p^m*sigma_max^(m+1)*(log(epn)^4/(n*L_n))^((m+1)/3)"
    else:
        t2 = e["theta_alpha_m"] * K ** (3.0 + m) / L * (K**3 * lepn ** (1.25 + 3.0 / a) / (n * L)) ** (12.0 / a + 2.0 * m)
        t3 = e["theta_m"] * K**m * smax ** (m + 1.0) * (lepn ** (1.0 + 3.0 / a) / (n * L)) ** ((m + 1.0) / 3.0)
        f2 = "Theta_alpha_m*K_p^(3+m)/L_n*(K_p^3*log(epn)^(5/4+3/alpha)/(n*L_n))^(12/alpha+2m)"
        f3 = "Theta_m*K_p^m*sigma_max^(m+1)*(log(epn)^(1+3/alpha)/(n*L_n))^((m+1)/3)"
    terms = [
        Term("main", main, "Theta_m*phi_acm*(L_n^2*log(ep)^4/n)^(1/6)"),
        Term("heavy_tail", t2, f2),
        Term("weighted_third", t3, f3),
        Term("tail", last, "Theta_m*K_p^(m+2)/(sigma_max^2*n^(2/3))"),
    ]
    return terms, {"kind": kind}, {"guards_ok": True}


def rate_subweibull(kind, K_p, alpha, pm, p, n, m=0, sigma_max=1.0, phi_constants: Mapping | None = None) -> RateBundle:
    """Evaluate one of the sub-Weibull corollary displays.

    ``phi_constants`` may set phi_ac0, phi_acm, C0, frakC and the Theta
    family (theta, theta_alpha, theta_m, theta_alpha_m); all default to 1
    except C0 and frakC.
    """
    if kind not in ("C36a", "C36b", "C37a", "C37b", "C37c"):
        raise ValueError(f"unknown corollary kind {kind!r}")
    if not 0.0 < alpha <= 2.0:
        raise ValueError("alpha must lie in (0, 2]")
    if K_p < 1:
        raise ValueError("K_p must be >= 1")
    _common_checks(p, n)
    consts = dict(_SW_DEFAULTS)
    consts.update(phi_constants or {})
    v = PMView(pm)
    echo = dict(kind=kind, K_p=K_p, alpha=alpha, p=p, n=n, m=m, sigma_max=sigma_max, L_n=v.L_n(), **consts)
    if kind == "C37c":
        echo["nu_m"] = v.nu(m) if m >= 1 else 0.0
    if kind.startswith("C36") and m != 0:
        raise ValueError("the uniform corollary is stated for m = 0")
    bad = _sw_guards(echo)
    if bad:
        raise GuardError("guard violated: " + "; ".join(bad))
    return _bundle("C36" if kind.startswith("C36") else "C37", echo)


@_evaluator("C37S")
def _eval_c37s(e):
    lp = log_ep(e["p"])
    a, m, n = e["alpha"], e["m"], e["n"]
    main = e["slack"] * e["phi_acm"] * (e["L_n"] * lp**2) ** (1.0 / 3.0) / n ** (1.0 / 6.0)
    extra = 0.0 if a > 1 else e["slack"] * (lp ** (1.25 + 3.0 / a) / n) ** ((m + 1.0) / 3.0)
    return [Term("main", main, "slack*phi_acm*(L_n*log(ep)^2)^(1/3)/n^(1/6)"),
            Term("heavy_tail", extra, "0 if alpha>1 else slack*(log(ep)^(5/4+3/alpha)/n)^((m+1)/3)")], {}, None


def rate_subweibull_simplified(alpha, L_n, p, n, m=0, phi_acm=1.0, slack=DEFAULT_SLACK) -> RateBundle:
    """Order-of-magnitude form of the non-uniform corollary (bounded K_p, sigma_max, 1/L_n)."""
    _common_checks(p, n)
    return _bundle("C37S", dict(alpha=alpha, L_n=float(L_n), p=p, n=n, m=m, phi_acm=phi_acm, slack=slack))


# Moment differences --------------------------------------------------------------

@_evaluator("RMK38")
def _eval_rmk38(e):
    lp = log_ep(e["p"])
    m, b, mu = e["m"], e["beta"], e["mu"]
    base = (e["L_n"] * lp**2) ** (1.0 / 3.0) / e["n"] ** (1.0 / 6.0)
    t1 = e["slack"] * m * mu * base
    t2 = e["slack"] * m / b * mu ** (m + b + 1.0) * base
    return [Term("uniform", t1, "slack*m*mu*(L_n*log(ep)^2)^(1/3)/n^(1/6)"),
            Term("weighted", t2, "slack*(m/beta)*mu^(m+beta+1)*(L_n*log(ep)^2)^(1/3)/n^(1/6)")], {}, None


def rate_moment_diff(m, beta_choice, mu, pm, p, n, slack=DEFAULT_SLACK) -> RateBundle:
    _common_checks(p, n)
    if m < 1:
        raise ValueError("m must be >= 1")
    if beta_choice == "paper-default":
        if not mu > 1:
            raise ValueError(f"paper-default beta = 1/log(mu) needs mu > 1, got mu={mu}")
        beta = 1.0 / math.log(mu)
    else:
        beta = float(beta_choice)
        if not beta > 0:
            raise ValueError("beta must be positive")
    L = pm if isinstance(pm, (int, float)) else PMView(pm).L_n()
    return _bundle("RMK38", dict(m=m, beta=beta, mu=mu, p=p, n=n, slack=slack, L_n=float(L)))


def moment_diff_bound(m, beta_choice, mu, pm, p, n, slack=DEFAULT_SLACK) -> float:
    return rate_moment_diff(m, beta_choice, mu, pm, p, n, slack).total


# Cramer-type large deviation -------------------------------------------------------

def cramer_record(e: Mapping) -> dict:
    """All intermediate constants of the large-deviation bound, branch by branch."""
    mu, smax, H, L, C0, C, p, n = (e[k] for k in ("mu", "sigma_max", "H", "L_n", "C0", "frakC", "p", "n"))
    phi0ac, phi2, phi4 = e["phi_ac0"], e["phi2"], e["phi4"]
    lp = log_ep(p)
    len_ = math.log(math.e * n)
    C2 = C0 * lp
    C3 = C0 * lp**2
    B = 2.0 * (1.0 + smax**-2) / H
    pi_tilde_terms = [
        4.0,
        12.0 * phi0ac * (8.0 * C3 * L * math.exp(C)) ** (1.0 / 3.0),
        20.0 * phi0ac * lp * math.log(8.0 * C0 * n) / (H * n ** (1.0 / 3.0)),
        5.1 * lp / (C0 * n ** (5.0 / 6.0)),
    ]
    pi_tilde = pi_tilde_terms[0] + pi_tilde_terms[1] + pi_tilde_terms[2] + pi_tilde_terms[3]
    pi_br = [
        pi_tilde,
        (132.0 * phi2) ** (4.0 / 3.0),
        19.0 * C3 * L * math.exp(C) / phi4,
        (37.0 * C3 * L * math.exp(C)) ** (4.0 / 7.0),
        (24.0 * C2 / (phi4**5 * H**2)) ** (4.0 / 11.0),
    ]
    Pi = max(pi_br)
    m_br = [
        2.0 * Pi,
        (112.0 * phi2 + 83.0 * C3 * L) ** (4.0 / 3.0),
        (48.0 * C2) ** (10.0 / 23.0) / (phi4**32 * H**20) ** (1.0 / 23.0),
        36.0 * (C3 * L * phi2) ** (2.0 / 3.0),
        (124.0 * C3 * L) ** 2 / ((mu + 1.0) ** (17.0 / 8.0) * n ** (5.0 / 16.0)),
    ]
    M = max(m_br)
    b_br = [
        1.0 / (3.0 * (phi4**4 * Pi) ** (1.0 / 3.0)),
        1.0 / (4.0 * (phi4**4 * M) ** (4.0 / 15.0)),
        len_ ** (-1.0 / 3.0) / (2.0 * (phi4 * B) ** (1.0 / 3.0)),
        Pi ** (1.0 / 9.0) * len_ ** (-4.0 / 9.0) / (2.0 * (B * lp) ** (4.0 / 9.0)),
        M ** 0.125 * len_**-0.5 / math.sqrt(6.0 * C * B * lp) if C > 0 else math.inf,
    ]
    B0 = min(b_br)
    shrink = math.exp(-3.0 * M**0.25 * (mu + 1.0) ** (-17.0 / 16.0) * len_ * n ** (-5.0 / 32.0))
    return {
        "C2": C2, "C3": C3, "B": B,
        "Pi_tilde_terms": pi_tilde_terms, "Pi_tilde": pi_tilde,
        "Pi_branches": pi_br, "Pi": Pi,
        "M_branches": m_br, "M": M,
        "B0_branches": b_br, "B0": B0,
        "admissible_max": B0 * shrink,
    }


def frakB_s(record: Mapping, s: float, mu: float, n: float) -> float:
    """Shrunken radius B_s = B_0 (1 + 17 M^{1/4} / (6 (mu+1)^{17/16} n^{5/32}))^{-s}."""
    f = 1.0 + 17.0 * record["M"] ** 0.25 / (6.0 * (mu + 1.0) ** (17.0 / 16.0) * n ** (5.0 / 32.0))
    return record["B0"] * f ** (-s)


@_evaluator("T51")
def _eval_t51(e):
    rec = cramer_record(e)
    x = (e["r"] + 1.0) / e["n"] ** (1.0 / 6.0)
    bound = 1.02 * rec["M"] * x
    validity = {"admissible": x <= rec["admissible_max"], "lhs": x, "rhs": rec["admissible_max"]}
    rec = {k: (v if not isinstance(v, float) or math.isfinite(v) else None) for k, v in rec.items()}
    rec["B0_branches"] = [v if math.isfinite(v) else None for v in rec["B0_branches"]]
    return [Term("ratio", bound, "1.02*M*(r+1)*n^(-1/6)")], rec, validity


def cramer_constants(H, pm, mu, p, n, C0=DEFAULT_C0, frakC=DEFAULT_FRAKC, bundle: ConstantBundle | None = None, r=0.0) -> RateBundle:
    if not H > 0:
        raise ValueError("H must be positive")
    if n < 4:
        raise ValueError("the large-deviation bound needs n >= 4")
    _common_checks(p, n, C0, frakC)
    if bundle is None:
        raise ValueError("a ConstantBundle (phi2, phi4, phi_ac[0]) is required")
    if 0 not in bundle.phi_ac and 0.0 not in bundle.phi_ac:
        raise ValueError("bundle must include phi_ac at m = 0")
    L = pm if isinstance(pm, (int, float)) else PMView(pm).L_n()
    echo = dict(
        H=H, mu=mu, p=p, n=n, C0=C0, frakC=frakC, r=float(r), L_n=float(L),
        sigma_max=bundle.inputs[2], phi2=bundle.phi2, phi4=bundle.phi4, phi_ac0=bundle.phi_ac.get(0, bundle.phi_ac.get(0.0)),
    )
    return _bundle("T51", echo)


# Sub-Weibull large deviation ----------------------------------------------------------

@_evaluator("C52")
def _eval_c52(e):
    lp = log_ep(e["p"])
    n, r, mu = e["n"], e["r"], e["mu"]
    x = (r + 1.0) / n ** (1.0 / 6.0)
    bound = e["theta1"] * lp ** (8.0 / 3.0) * x
    g1_rhs = lp ** (64.0 / 15.0) * math.log(math.e * n) ** (32.0 / 5.0) * (mu + 1.0) ** (-34.0 / 5.0)
    g2_rhs = e["theta2"] * math.log(math.e * e["p"] + n) ** (-28.0 / 9.0)
    validity = {
        "guard_sample_size": n >= g1_rhs, "guard_sample_size_rhs": g1_rhs,
        "guard_radius": x <= g2_rhs, "guard_radius_rhs": g2_rhs,
    }
    validity["guards_ok"] = validity["guard_sample_size"] and validity["guard_radius"]
    return [Term("ratio", bound, "Theta1*log(ep)^(8/3)*(r+1)*n^(-1/6)")], {}, validity


def rate_cramer_c52(K_p, alpha, sigmas, mu, p, n, r, theta1=1.0, theta2=1.0) -> RateBundle:
    if not 1.0 <= alpha <= 2.0:
        raise ValueError(f"alpha must lie in [1, 2], got {alpha}")
    _common_checks(p, n)
    smin, smax = sigmas
    return _bundle("C52", dict(K_p=K_p, alpha=alpha, sigma_min=smin, sigma_max=smax, mu=mu, p=p, n=n, r=float(r), theta1=theta1, theta2=theta2))


def cramer_subweibull_c52(K_p, alpha, sigmas, mu, p, n, r, theta1=1.0, theta2=1.0) -> tuple[float, bool]:
    b = rate_cramer_c52(K_p, alpha, sigmas, mu, p, n, r, theta1, theta2)
    return b.total, b.validity["guards_ok"]


THEOREMS = ("T31", "E32", "APPA", "P32", "T33", "T34", "T35", "C36", "C37", "C37S", "RMK38", "T51", "C52")
