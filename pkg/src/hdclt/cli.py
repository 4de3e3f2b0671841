"""Command-line entry point: ``hdclt <subcommand> [--config FILE] [flags]``.

Configs are flat ``key = value`` files (INI syntax, values parsed as JSON
where possible) or JSON documents.  ``family.*`` and ``cov.*`` keys give the
one level of nesting.  Flags override config keys, and ``--set key=value``
overrides anything.  Every run writes a CSV and a JSON summary whose
``config`` block is the fully resolved config, so feeding a summary back
through ``--config`` reproduces the run.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import io
import json
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import constants as K
from . import empproc, experiments, gaussmax, posi, smoothmax
from .randvec import BASES, CovarianceSpec, DistributionFamily, PseudoMoments

SCHEMA_VERSION = "1"
REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


# ---------------------------------------------------------------- schema

def _int(v):
    if isinstance(v, bool) or float(v) != int(float(v)):
        raise ValueError("expected an integer")
    return int(float(v))


def _float(v):
    if isinstance(v, bool):
        raise ValueError("expected a number")
    return float(v)


def _str(v):
    return str(v)


def _opt(conv):
    return lambda v: None if v is None or v == "auto" else conv(v)


def _list(conv):
    def f(v):
        if isinstance(v, str):
            v = [x for x in v.replace(",", " ").split()]
        if not isinstance(v, (list, tuple)):
            v = [v]
        return [conv(x) for x in v]
    return f


def _any(v):
    return v


COMMON = {"seed": (_int, 0), "format": (_str, "csv")}
FAMILY = {
    "family.base": (_str, "rademacher"),
    "family.alpha": (_opt(_float), None),
    "family.df": (_opt(_float), None),
    "p": (_int, 4),
    "cov.kind": (_str, "identity"),
    "cov.variances": (_opt(_list(_float)), None),
    "cov.rho": (_float, 0.5),
    "cov.sigma2": (_float, 1.0),
    "cov.matrix": (_opt(_any), None),
}
PM_KEYS = ("pm.L_n", "pm.M_n", "pm.Lbar_n0", "pm.Lbar_nm", "pm.nu", "pm.L_q")

SCHEMAS = {
    "constants": {
        **FAMILY,
        "theorem": (_str, REQUIRED),
        "n": (_int, 1024),
        "m": (_float, 0.0),
        "tau": (_float, 1.0),
        "C0": (_float, K.DEFAULT_C0),
        "frakC": (_float, K.DEFAULT_FRAKC),
        "slack": (_float, K.DEFAULT_SLACK),
        "theta_policy": (_str, "numeric"),
        "phi_ac0": (_opt(_float), None),
        "phi_acm": (_opt(_float), None),
        "mu": (_opt(_float), None),
        **{k: (_opt(_any), None) for k in PM_KEYS},
        "kind": (_str, "C37a"),
        "K_p": (_opt(_float), None),
        "orlicz_alpha": (_float, 1.0),
        "r_nm": (_opt(_float), None),
        "tail_sup": (_opt(_float), None),
        "H": (_float, 1.0),
        "r": (_float, 0.0),
        "beta": (_str, "paper-default"),
        "theta1": (_float, 1.0),
        "theta2": (_float, 1.0),
        "pm_seed": (_int, 0),
    },
    "anticonc": {
        **FAMILY,
        "m_list": (_list(_float), [0.0, 1.0, 2.0]),
        "eps": (_list(_float), [0.05, 0.1, 0.2]),
        "r_grid": (_list(_float), list(np.round(np.linspace(0.0, 6.0, 25), 10))),
        "reps": (_int, 100_000),
        "theta_policy": (_str, "numeric"),
    },
    "smoothmax-check": {
        "p": (_int, 4),
        "r": (_float, 1.0),
        "eps": (_float, 0.5),
        "C0": (_float, K.DEFAULT_C0),
        "frakC": (_float, K.DEFAULT_FRAKC),
        "samples": (_int, 1000),
        "pairs": (_int, 10_000),
    },
    "simulate-delta": {
        **FAMILY,
        "n": (_int, 1024),
        "m": (_float, 0.0),
        "reps": (_int, 100_000),
        "grid_policy": (_str, "exact"),
        "gaussian_side": (_str, "auto"),
    },
    "lindeberg": {
        **FAMILY,
        "n": (_int, 256),
        "k_list": (_list(_int), REQUIRED),
        "r": (_float, REQUIRED),
        "reps": (_int, 100_000),
    },
    "large-dev": {
        **FAMILY,
        "n": (_int, 400),
        "r_list": (_list(_float), [0.5, 1.0, 2.0]),
        "reps": (_int, 1_000_000),
    },
    "moments": {
        **FAMILY,
        "n": (_int, 256),
        "m": (_float, 1.0),
        "reps": (_int, 100_000),
    },
    "posi": {
        "design": (_str, REQUIRED),
        "k": (_int, REQUIRED),
        "alpha": (_list(_float), [0.05]),
        "reps": (_int, 100_000),
        "var_y": (_float, 1.0),
    },
    "empproc": {
        "n_list": (_list(_int), [16, 256, 4096]),
        "xi_dist": (_str, "student_t3"),
        "reps": (_int, 10_000),
    },
}
SCHEMAS = {k: {**COMMON, **v} for k, v in SCHEMAS.items()}
SUBCOMMANDS = tuple(SCHEMAS)


@dataclass
class ExperimentConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    def to_dict(self) -> dict:
        return {"subcommand": self.subcommand, **self.values}


def _flatten(d, prefix=""):
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict) and k in ("family", "cov", "pm"):
            out.update(_flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _parse_scalar(text: str):
    try:
        return json.loads(text)
    except (json.JSONDecodeError, TypeError):
        return text


def load_config(path) -> dict:
    """Read a JSON document, a JSON summary (uses its ``config``) or key = value text."""
    with open(path) as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        doc = json.loads(text)
        if "config" in doc and isinstance(doc["config"], dict):
            doc = doc["config"]
        return _flatten(doc)
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    cp.read_string(text if stripped.startswith("[") else "[hdclt]\n" + text)
    out = {}
    for sec in cp.sections():
        prefix = "" if sec in ("hdclt", "run", "inputs") else sec + "."
        for k, v in cp.items(sec):
            out[prefix + k] = _parse_scalar(v)
    return out


def validate_config(raw: dict, subcommand: str | None = None) -> ExperimentConfig:
    """Materialize defaults and check all constraints; errors are aggregated."""
    raw = dict(raw)
    sub = subcommand or raw.pop("subcommand", None)
    raw.pop("subcommand", None)
    errors = []
    if sub not in SCHEMAS:
        raise ConfigError([f"subcommand: unknown {sub!r}; choose from {', '.join(SUBCOMMANDS)}"])
    schema = SCHEMAS[sub]
    vals = {}
    for key in raw:
        if key not in schema:
            errors.append(f"{key}: unknown key for {sub}")
    for key, (conv, default) in schema.items():
        if key in raw and raw[key] is not None:
            try:
                vals[key] = conv(raw[key])
            except (TypeError, ValueError) as exc:
                errors.append(f"{key}: invalid value {raw[key]!r} ({exc})")
        elif default is REQUIRED:
            errors.append(f"{key}: required")
        else:
            vals[key] = default
    _cross_checks(sub, vals, errors)
    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(sub, vals)


def _cross_checks(sub, v, errors):
    def need(cond, msg):
        if not cond:
            errors.append(msg)

    def num(key):
        x = v.get(key)
        return x if isinstance(x, (int, float)) else None

    if num("seed") is not None:
        need(v["seed"] >= 0, "seed: must be nonnegative")
    need(v.get("format") in ("csv", "json"), "format: must be csv or json")
    if "reps" in v and num("reps") is not None:
        need(v["reps"] >= 1, "reps: must be positive")
        if sub not in ("empproc", "posi"):
            need(v["reps"] >= 1000, "reps: must be >= 1000")
    for key in ("n", "p", "k"):
        if num(key) is not None:
            need(v[key] >= 1, f"{key}: must be >= 1")
    if "m" in v and num("m") is not None:
        need(v["m"] >= 0, "m: must be nonnegative")
    if "family.base" in v:
        base = v["family.base"]
        need(base in BASES, f"family.base: unknown {base!r}; choose from {', '.join(BASES)}")
        if base == "subweibull":
            a = v.get("family.alpha")
            need(a is not None and 0 < a <= 2, "family.alpha: subweibull needs 0 < alpha <= 2")
        if base == "student_t":
            df = v.get("family.df")
            need(df is not None and df > 2, "family.df: student_t needs df > 2 for a finite variance")
        need(v["cov.kind"] in ("identity", "diagonal", "equicorrelated", "dense"), f"cov.kind: unknown {v['cov.kind']!r}")
        if v["cov.kind"] == "diagonal":
            need(v["cov.variances"] is not None, "cov.variances: required for cov.kind = diagonal")
        if v["cov.kind"] == "dense":
            need(v["cov.matrix"] is not None, "cov.matrix: required for cov.kind = dense")
        if v["cov.kind"] == "equicorrelated" and num("cov.rho") is not None:
            need(0 <= v["cov.rho"] < 1, "cov.rho: must lie in [0, 1)")
    if sub == "constants":
        th = v.get("theorem")
        need(th in K.THEOREMS, f"theorem: unknown {th!r}; choose from {', '.join(K.THEOREMS)}")
        need(v.get("theta_policy") in ("numeric", "formula"), "theta_policy: must be numeric or formula")
        if th == "T35" and num("m") is not None and num("tau") is not None:
            need(v["m"] >= 1, "m: T35 requires m >= 1 (Fix m ≥ 1 and τ ≥ m)")
            need(v["tau"] >= v["m"], f"tau: T35 requires tau >= m, got tau={v['tau']} < m={v['m']} (Fix m ≥ 1 and τ ≥ m)")
        if th in ("T33", "E32") and num("tau") is not None:
            need(v["tau"] >= 1, f"tau: {th} requires tau >= 1")
        if th == "APPA" and num("tau") is not None:
            need(0 < v["tau"] < 1, "tau: APPA covers 0 < tau < 1")
        if th == "T34":
            need(v.get("r_nm") is not None, "r_nm: required for T34")
            need(v.get("tail_sup") is not None, "tail_sup: required for T34")
        if th in ("C36", "C37", "C52"):
            need(v.get("K_p") is not None, f"K_p: required for {th}")
        if th in ("C36", "C37"):
            need(v.get("kind", "").startswith(th), f"kind: {th} needs one of its variants, got {v.get('kind')!r}")
        if th == "T51" and num("n") is not None:
            need(v["n"] >= 4, "n: T51 requires n >= 4")
    if sub == "simulate-delta":
        need(v.get("grid_policy") in ("exact", "quantiles"), "grid_policy: must be exact or quantiles")
        need(v.get("gaussian_side") in ("auto", "exact", "mc"), "gaussian_side: must be auto, exact or mc")
    if sub == "lindeberg" and isinstance(v.get("k_list"), list) and num("n") is not None:
        need(all(0 <= k <= v["n"] for k in v["k_list"]), "k_list: entries must lie in [0, n]")
    if sub == "moments" and num("m") is not None:
        need(v["m"] >= 1, "m: must be >= 1")
    if sub == "empproc":
        need(v.get("xi_dist") in empproc.XI_DISTS, f"xi_dist: choose from {', '.join(empproc.XI_DISTS)}")
    if sub == "smoothmax-check":
        need(num("eps") is not None and v["eps"] > 0, "eps: must be positive")
        need(num("r") is not None and v["r"] >= 0, "r: must be nonnegative")
    if sub == "posi" and isinstance(v.get("alpha"), list):
        need(all(0 < a < 1 for a in v["alpha"]), "alpha: levels must lie in (0, 1)")


# ---------------------------------------------------------------- builders

def build_cov(cfg: ExperimentConfig) -> CovarianceSpec:
    kind, p = cfg["cov.kind"], cfg["p"]
    if kind == "identity":
        return CovarianceSpec.identity(p)
    if kind == "diagonal":
        cov = CovarianceSpec.diagonal(cfg["cov.variances"])
    elif kind == "equicorrelated":
        cov = CovarianceSpec.equicorrelated(cfg["cov.rho"], cfg["cov.sigma2"], p)
    else:
        cov = CovarianceSpec.dense(cfg["cov.matrix"])
    if cov.p != p:
        raise ConfigError([f"p: {p} disagrees with covariance dimension {cov.p}"])
    return cov


def build_family(cfg: ExperimentConfig) -> DistributionFamily:
    return DistributionFamily(cfg["family.base"], build_cov(cfg), alpha=cfg["family.alpha"], df=cfg["family.df"])


# ---------------------------------------------------------------- output

@dataclass
class Artifacts:
    header: tuple
    rows: list
    summary: dict


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def render_csv(art: Artifacts) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("schema_version",) + tuple(art.header))
    for row in art.rows:
        w.writerow([SCHEMA_VERSION] + [_cell(x) for x in row])
    return buf.getvalue()


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        f = float(o)
        return f if math.isfinite(f) else repr(f)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def render_json(art: Artifacts, cfg: ExperimentConfig) -> str:
    doc = {"schema_version": SCHEMA_VERSION, "subcommand": cfg.subcommand, "config": cfg.to_dict(), **art.summary}
    return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------- commands

def _summary_mu(cov, seed):
    return gaussmax.estimate_summary(cov, reps=100_000, seed=seed)


def _pm_source(cfg, family):
    explicit = {k.split(".", 1)[1]: cfg[k] for k in PM_KEYS if cfg[k] is not None}
    if explicit:
        return explicit
    return PseudoMoments(family, cfg["n"], seed=cfg["pm_seed"])


def cmd_constants(cfg: ExperimentConfig, workers=None) -> Artifacts:
    th = cfg["theorem"]
    family = build_family(cfg)
    cov = family.cov
    p, n, m, tau = cfg["p"], cfg["n"], cfg["m"], cfg["tau"]
    summ = _summary_mu(cov, cfg["seed"])
    mu = cfg["mu"] if cfg["mu"] is not None else summ.median_mu
    m_list = sorted({0.0, float(m)})
    cb = K.anticonc_constants(mu, cov.sigma_min, cov.sigma_max, m_list, theta_policy=cfg["theta_policy"])
    phi0 = cfg["phi_ac0"] if cfg["phi_ac0"] is not None else cb.phi_ac[0.0]
    phim = cfg["phi_acm"] if cfg["phi_acm"] is not None else cb.phi_ac[float(m)]
    C0, C = cfg["C0"], cfg["frakC"]
    if th in ("C52",):
        pm = None
    else:
        pm = _pm_source(cfg, family)
    if th == "T31":
        b = K.rate_uniform_t31(pm, p, n, C0, C, phi0)
    elif th in ("E32", "APPA"):
        b = K.rate_finite_moment(pm, p, n, tau, 0, phi0, C0, C, cfg["slack"])
    elif th == "P32":
        b = K.rate_prop32(K.PMView(pm).nu(3.0), p, n, phi0, C0)
    elif th == "T33":
        b = K.rate_optimal_t33(pm, p, n, tau, phi0, C0, cfg["slack"])
    elif th == "T34":
        b = K.rate_nonuniform_t34(pm, p, n, m, cfg["r_nm"], cfg["tail_sup"], phim, phi0, C0, C)
    elif th == "T35":
        b = K.rate_nonuniform_t35(pm, p, n, m, tau, phim, C0, C)
    elif th in ("C36", "C37"):
        consts = dict(phi_ac0=phi0, phi_acm=phim, C0=C0, frakC=C)
        b = K.rate_subweibull(cfg["kind"], cfg["K_p"], cfg["orlicz_alpha"], pm, p, n, m, cov.sigma_max, consts)
    elif th == "C37S":
        b = K.rate_subweibull_simplified(cfg["orlicz_alpha"], K.PMView(pm).L_n(), p, n, m, phim, cfg["slack"])
    elif th == "RMK38":
        beta = cfg["beta"]
        b = K.rate_moment_diff(m, beta if beta == "paper-default" else float(beta), mu, pm, p, n, cfg["slack"])
    elif th == "T51":
        b = K.cramer_constants(cfg["H"], pm, mu, p, n, C0, C, bundle=cb, r=cfg["r"])
    else:
        b = K.rate_cramer_c52(cfg["K_p"], cfg["orlicz_alpha"], (cov.sigma_min, cov.sigma_max), mu, p, n, cfg["r"],
                              cfg["theta1"], cfg["theta2"])
    rows = [(b.theorem, t.name, t.value, t.formula) for t in b.terms]
    rows.append((b.theorem, "total", b.total, "sum of terms"))
    return Artifacts(("theorem", "term", "value", "formula"), rows, {"bundle": b.to_dict()})


def cmd_anticonc(cfg, workers=None) -> Artifacts:
    cov = build_cov(cfg)
    summ = gaussmax.estimate_summary(cov, reps=cfg["reps"], seed=cfg["seed"], workers=workers)
    cb = K.anticonc_constants(summ.median_mu, summ.sigma_min, summ.sigma_max, cfg["m_list"], theta_policy=cfg["theta_policy"])
    tail = gaussmax.check_tail_bounds(cov, summ, cfg["r_grid"], cfg["eps"], cfg["reps"], cfg["seed"], workers, bundle=cb)
    band = gaussmax.check_anticoncentration(cov, cb, cfg["m_list"], cfg["eps"], cfg["r_grid"], cfg["reps"], cfg["seed"], workers)
    keys = gaussmax.TAIL_HEADER[1:]
    rows = [tuple(r[k] for k in keys) for r in tail.rows + band.rows]
    summary = {
        "median_mu": summ.median_mu, "mu_ci": list(summ.mu_ci), "summary_method": summ.method,
        "constants": cb.to_dict(), "n_checks": len(rows),
        "n_violations": len(tail.violations) + len(band.violations), "excluded": tail.excluded,
    }
    return Artifacts(keys, rows, summary)


def cmd_smoothmax(cfg, workers=None) -> Artifacts:
    prm = smoothmax.SmoothMaxParams(cfg["r"], cfg["eps"], cfg["p"])
    d = smoothmax.certify_derivative_bounds(prm, C0=cfg["C0"], samples=cfg["samples"], seed=cfg["seed"])
    s = smoothmax.certify_stability(prm, frakC=cfg["frakC"], pairs=cfg["pairs"], seed=cfg["seed"])
    rows = list(d.rows) + list(s.rows)
    summary = {
        "derivative_bounds": d.summary(), "stability": s.summary(),
        "provable_C0": smoothmax.provable_C0(cfg["p"]), "provable_frakC": smoothmax.stability_frakC(cfg["p"]),
        "passed": d.passed and s.passed,
    }
    return Artifacts(smoothmax.CERT_HEADER[1:], rows, summary)


def cmd_simulate_delta(cfg, workers=None) -> Artifacts:
    fam = build_family(cfg)
    est = experiments.estimate_delta(fam, cfg["n"], cfg["m"], cfg["reps"], cfg["grid_policy"], cfg["seed"], workers,
                                     cfg["gaussian_side"])
    c = est.curve
    rows = list(zip(c["r"].tolist(), c["F_S"].tolist(), np.asarray(c["F_U"], dtype=float).tolist(), c["weighted_diff"].tolist()))
    return Artifacts(("r", "F_S", "F_U", "weighted_diff"), rows, {"estimate": est.summary()})


def cmd_lindeberg(cfg, workers=None) -> Artifacts:
    fam = build_family(cfg)
    path = experiments.lindeberg_path(fam, cfg["n"], cfg["k_list"], cfg["r"], cfg["reps"], cfg["seed"], workers)
    rows = [(k, path.r, *path.deltas[k]) for k in path.k_list]
    return Artifacts(("k", "r", "delta", "se"), rows, {"family_id": path.family_id, "n": path.n})


def cmd_large_dev(cfg, workers=None) -> Artifacts:
    fam = build_family(cfg)
    rows = []
    for r in cfg["r_list"]:
        ratio, se, ok = experiments.estimate_cramer_ratio(fam, cfg["n"], r, cfg["reps"], cfg["seed"], workers)
        rows.append((r, ratio, se, ok))
    return Artifacts(("r", "ratio", "se", "resolvable"), rows, {"family_id": fam.family_id, "n_unresolvable": sum(not r[3] for r in rows)})


def cmd_moments(cfg, workers=None) -> Artifacts:
    fam = build_family(cfg)
    diff, se = experiments.estimate_moment_diff(fam, cfg["n"], cfg["m"], cfg["reps"], cfg["seed"], workers)
    return Artifacts(("n", "m", "diff", "se"), [(cfg["n"], cfg["m"], diff, se)], {"family_id": fam.family_id, "diff": diff, "se": se})


def cmd_posi(cfg, workers=None) -> Artifacts:
    design = posi.DesignMatrix.from_csv(cfg["design"])
    res = posi.simulate_max_t(design, cfg["k"], cfg["var_y"], cfg["reps"], cfg["seed"], cfg["alpha"], workers)
    rows = [(a, res.quantile[a], res.quantile_se[a]) for a in res.quantile]
    summary = {"mu_posi": res.mu_posi, "quantiles": {str(a): q for a, q in res.quantile.items()},
               "kappa": res.kappa, "n_models": res.n_models, "mu_ci": list(res.mu_ci)}
    return Artifacts(("alpha", "quantile", "se"), rows, summary)


def cmd_empproc(cfg, workers=None) -> Artifacts:
    rows = []
    for n in cfg["n_list"]:
        z, se = empproc.estimate_Zn(n, cfg["xi_dist"], cfg["reps"], cfg["seed"], workers)
        w, sew = empproc.gaussian_width_bound(n, None, cfg["reps"], cfg["seed"], workers)
        rows.append((n, z, se, w, sew))
    return Artifacts(("n", "zhat", "se", "width", "se_width"), rows, {"xi_dist": cfg["xi_dist"]})


COMMANDS = {
    "constants": cmd_constants,
    "anticonc": cmd_anticonc,
    "smoothmax-check": cmd_smoothmax,
    "simulate-delta": cmd_simulate_delta,
    "lindeberg": cmd_lindeberg,
    "large-dev": cmd_large_dev,
    "moments": cmd_moments,
    "posi": cmd_posi,
    "empproc": cmd_empproc,
}


def run(cfg: ExperimentConfig, out=None, workers=None, stdout=None) -> int:
    """Execute a validated config; write ``<subcommand>.csv`` and ``.json`` under ``out``."""
    stdout = stdout or sys.stdout
    art = COMMANDS[cfg.subcommand](cfg, workers=workers)
    csv_text = render_csv(art)
    json_text = render_json(art, cfg)
    if out:
        os.makedirs(out, exist_ok=True)
        stem = cfg.subcommand.replace("-", "_")
        with open(os.path.join(out, stem + ".csv"), "w") as fh:
            fh.write(csv_text)
        with open(os.path.join(out, stem + ".json"), "w") as fh:
            fh.write(json_text)
    stdout.write(json_text if cfg["format"] == "json" else csv_text)
    return 0


# ---------------------------------------------------------------- argparse

FLAG_KEYS = {
    # flag dest -> config key
    "family": "family.base", "family_alpha": "family.alpha", "df": "family.df", "cov": "cov.kind", "rho": "cov.rho",
    "p": "p", "n": "n", "m": "m", "reps": "reps", "theorem": "theorem", "tau": "tau", "C0": "C0", "frakC": "frakC",
    "theta_policy": "theta_policy", "k": "k", "design": "design", "r": "r", "eps": "eps", "k_list": "k_list",
    "r_list": "r_list", "n_list": "n_list", "xi_dist": "xi_dist", "grid_policy": "grid_policy", "alpha": "alpha",
}


def _add_common(sp):
    sp.add_argument("--config", "--inputs", dest="config", help="config file (key = value, JSON, or an emitted summary)")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--workers", type=int, help="thread count; never changes results")
    sp.add_argument("--out", help="directory for the CSV and JSON summary")
    sp.add_argument("--format", choices=("csv", "json"))
    sp.add_argument("--json", dest="format", action="store_const", const="json")
    sp.add_argument("--csv", dest="format", action="store_const", const="csv")
    sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override any config key")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hdclt", description="Numerical lab for high-dimensional CLT bounds.")
    sub = ap.add_subparsers(dest="subcommand", required=True)
    fam_flags = lambda sp: (
        sp.add_argument("--family", help=f"base law: {', '.join(BASES)}"),
        sp.add_argument("--family-alpha", dest="family_alpha", help="sub-Weibull shape"),
        sp.add_argument("--df", help="student_t degrees of freedom"),
        sp.add_argument("--cov", help="identity, diagonal, equicorrelated or dense"),
        sp.add_argument("--rho"),
        sp.add_argument("--p"),
    )
    sp = sub.add_parser("constants", help="evaluate a theorem's rate bound")
    _add_common(sp)
    fam_flags(sp)
    for f in ("--theorem", "--n", "--m", "--tau", "--C0", "--frakC", "--theta-policy"):
        sp.add_argument(f, dest=f.lstrip("-").replace("-", "_"))
    sp = sub.add_parser("anticonc", help="check Gaussian-supremum tail and band inequalities")
    _add_common(sp)
    fam_flags(sp)
    sp.add_argument("--eps")
    sp.add_argument("--reps")
    sp = sub.add_parser("smoothmax-check", help="certify smooth-max derivative and stability bounds")
    _add_common(sp)
    for f in ("--p", "--r", "--eps", "--C0", "--frakC"):
        sp.add_argument(f, dest=f.lstrip("-"))
    for name, extra, hlp in (
            ("simulate-delta", ("--n", "--m", "--reps", "--grid-policy"), "estimate the sup-norm distance to the Gaussian"),
            ("lindeberg", ("--n", "--k-list", "--r", "--reps"), "swap k summands for Gaussians and track the shift"),
            ("large-dev", ("--n", "--r-list", "--reps"), "tail ratio of the scaled sum vs its Gaussian"),
            ("moments", ("--n", "--m", "--reps"), "difference of m-th moments of the sup-norm")):
        sp = sub.add_parser(name, help=hlp)
        _add_common(sp)
        fam_flags(sp)
        for f in extra:
            sp.add_argument(f, dest=f.lstrip("-").replace("-", "_"))
    sp = sub.add_parser("posi", help="simulate the max-|t| statistic over submodels")
    _add_common(sp)
    for f in ("--design", "--k", "--reps", "--alpha"):
        sp.add_argument(f, dest=f.lstrip("-"))
    sp = sub.add_parser("empproc", help="half-line multiplier process vs its Gaussian width")
    _add_common(sp)
    for f in ("--n-list", "--xi-dist", "--reps"):
        sp.add_argument(f, dest=f.lstrip("-").replace("-", "_"))
    return ap


def _raw_from_args(ns) -> dict:
    raw = load_config(ns.config) if ns.config else {}
    raw.pop("subcommand", None)
    for dest, key in FLAG_KEYS.items():
        v = getattr(ns, dest, None)
        if v is not None:
            raw[key] = _parse_scalar(v) if isinstance(v, str) else v
    if ns.seed is not None:
        raw["seed"] = ns.seed
    if ns.format is not None:
        raw["format"] = ns.format
    for item in ns.set:
        if "=" not in item:
            raise ConfigError([f"--set {item!r}: expected KEY=VALUE"])
        k, v = item.split("=", 1)
        raw[k.strip()] = _parse_scalar(v.strip())
    return raw


def _error(kind: str, messages, code: int) -> int:
    rec = {"schema_version": SCHEMA_VERSION, "error": {"type": kind, "messages": list(messages)}}
    sys.stderr.write(json.dumps(rec, sort_keys=True, ensure_ascii=False) + "\n")
    return code


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = validate_config(_raw_from_args(ns), ns.subcommand)
        return run(cfg, out=ns.out, workers=ns.workers)
    except ConfigError as exc:
        return _error("config", exc.errors, 2)
    except experiments.BudgetError as exc:
        return _error("budget", [str(exc)], 3)
    except (ValueError, OSError) as exc:
        return _error(type(exc).__name__, [str(exc)], 1)


if __name__ == "__main__":
    sys.exit(main())
