"""Experiment runner: ``lpball run|plot|sample|report-diff``.

Config files are flat ``key = value`` lines. ``#`` starts a comment, and a
value is a list when it contains commas or is wrapped in brackets
(``p = [1, 1.5, 2]`` and ``p = 1, 1.5, 2`` are the same). ``inf`` is
accepted wherever an exponent is expected.

Every suite writes ``<suite>.json`` (the report) and ``<suite>.csv`` (plot
data for the suite's default quantity) to ``output``, else
``$LPBALL_OUTPUT_DIR``, else ``./lpball-out``.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import sys
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from . import apps, moments, sampling, sections, slabs
from .stats import Estimate, RngState, bonferroni_z, ks_one_sample, ks_two_sample

SCHEMA_VERSION = 1
OUTPUT_ENV = "LPBALL_OUTPUT_DIR"
MIN_SAMPLES = 1000

SUITES = (
    "sampling-oracles",
    "moments",
    "khinchine",
    "psi2",
    "slabs",
    "sections-p-scan",
    "sections-lambda-scan",
    "cube",
    "brascamp-lieb",
    "balance",
    "cover",
)


class ConfigError(ValueError):
    pass


# --- configuration --------------------------------------------------------------------


def _scalar(tok: str):
    t = tok.strip()
    low = t.lower()
    if low in ("inf", "+inf", "infinity"):
        return math.inf
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(t)
    except ValueError:
        pass
    try:
        return float(t)
    except ValueError:
        return t


def parse_config_text(text: str) -> dict:
    cfg = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in cfg:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        is_list = val.startswith("[")
        if is_list:
            if not val.endswith("]"):
                raise ConfigError(f"line {lineno}: unterminated list")
            val = val[1:-1]
        if is_list or "," in val:
            cfg[key] = [_scalar(t) for t in val.split(",") if t.strip()]
        else:
            cfg[key] = _scalar(val)
    return cfg


def _list(v):
    return list(v) if isinstance(v, (list, tuple)) else [v]


@dataclass
class ExperimentConfig:
    suite: str
    params: dict = field(default_factory=dict)
    samples: int = 100_000
    seed: int = 0
    z: float = 3.0
    output: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        suite = d.pop("suite", None)
        if suite not in SUITES:
            raise ConfigError(f"unknown suite {suite!r}; expected one of {', '.join(SUITES)}")
        try:
            samples = int(d.pop("samples", 100_000))
            seed = int(d.pop("seed", 0))
            z = float(d.pop("z", 3.0))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        if samples < MIN_SAMPLES:
            raise ConfigError(f"samples must be >= {MIN_SAMPLES}")
        if not z > 0:
            raise ConfigError("z must be > 0")
        output = d.pop("output", None)
        cfg = cls(suite, d, samples, seed, z, None if output is None else str(output))
        errs = SUITE_TABLE[suite][1](cfg)
        if errs:
            raise ConfigError("; ".join(errs))
        return cfg

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(parse_config_text(fh.read()))

    def get(self, key, default):
        return _list(self.params.get(key, default))

    def one(self, key, default):
        v = self.params.get(key, default)
        if isinstance(v, list):
            if len(v) != 1:
                raise ConfigError(f"{key} expects a single value")
            v = v[0]
        return v

    def echo(self) -> dict:
        return {"suite": self.suite, "samples": self.samples, "seed": self.seed, "z": self.z,
                **{k: self.params[k] for k in sorted(self.params)}}

    def rng(self, i: int) -> RngState:
        return RngState(self.seed).child(i)


def _check_all(errs, name, values, pred, msg):
    for v in values:
        ok = False
        try:
            ok = bool(pred(v))
        except (TypeError, ValueError):
            pass
        if not ok:
            errs.append(f"{name}={v!r}: {msg}")


def _posint(v):
    return isinstance(v, int) and v >= 1


def _finite_p(v):
    return isinstance(v, (int, float)) and 0 < v < math.inf


# --- JSON helpers ---------------------------------------------------------------------


def _jsonable(obj):
    if isinstance(obj, Estimate):
        return {"value": _jsonable(obj.value), "stderr": _jsonable(obj.stderr), "samples": obj.samples}
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, RngState):
        return [obj.seed, obj.stream]
    return obj


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def content_hash(report: dict) -> str:
    body = {k: v for k, v in report.items() if k not in ("wall_clock", "content_hash")}
    return hashlib.sha256(_canonical(body).encode()).hexdigest()


def _band(x, value, stderr, z):
    return [x, value, value - z * stderr, value + z * stderr]


# --- suites ---------------------------------------------------------------------------
# Each suite returns (points, verdict, summary, plots); plots maps a quantity
# name to rows [abscissa, value, lo, hi].


def _v_sampling(cfg):
    errs = []
    _check_all(errs, "n", cfg.get("n", [2]), _posint, "must be a positive integer")
    _check_all(errs, "p", cfg.get("p", [2.0]), _finite_p, "must be finite and > 0")
    _check_all(errs, "m", cfg.get("m", []), _posint, "must be a positive integer")
    return errs


def suite_sampling(cfg):
    level = float(cfg.one("level", 1e-3))
    points, plot = [], []
    i = 0
    for n in cfg.get("n", [2]):
        for p in cfg.get("p", [2.0]):
            meas = sampling.BallMeasure.volume(n, p)
            x = meas.sample(cfg.samples, cfg.rng(i).generator())
            i += 1
            r = sampling.lp_norm(x, p)
            d, crit, ok = ks_one_sample(r, lambda t, n=n: np.clip(t, 0, 1) ** n, level)
            points.append({"check": "radial-ks", "n": n, "p": p, "statistic": d, "critical": crit, "pass": ok})
            plot.append([len(plot), d, 0.0, crit])
            for m in cfg.get("m", []):
                a = sampling.sample_projected_cone(n, p, m, cfg.rng(i).generator(), cfg.samples)
                b = sampling.sample_gamma_mixed(n, p, m / p, cfg.rng(i + 1).generator(), cfg.samples)
                i += 2
                dr, cr, okr = ks_two_sample(sampling.lp_norm(a, p), sampling.lp_norm(b, p), level)
                dm, cm, okm = ks_two_sample(a[:, 0], b[:, 0], level)
                points.append({"check": "projected-vs-mixed-ks", "n": n, "p": p, "m": m,
                               "radius_statistic": dr, "marginal_statistic": dm, "critical": cr,
                               "pass": bool(okr and okm)})
    verdict = all(pt["pass"] for pt in points)
    return points, verdict, {"level": level}, {"ks": plot}


def _v_moments(cfg):
    errs = _v_sampling(cfg)
    _check_all(errs, "q", cfg.get("q", [1, 2, 4]), lambda v: v >= 1, "must be >= 1")
    return errs


def suite_moments(cfg):
    qs = cfg.get("q", [1, 2, 4])
    points, plot = [], []
    i = 0
    for n in cfg.get("n", [2]):
        for p in cfg.get("p", [2.0]):
            meas = sampling.BallMeasure.volume(n, p)
            ests = moments.functional_moments_mc(moments.Direction.e1(n), meas, qs, cfg.rng(i), cfg.samples)
            i += 1
            for q, e in zip(qs, ests):
                exact = moments.marginal_abs_moment_exact(n, p, q)
                ok = e.within(exact, cfg.z)
                points.append({"n": n, "p": p, "q": q, "estimate": e, "exact": exact,
                               "margin": e.value - exact, "pass": ok})
                plot.append(_band(len(plot), e.value / exact, e.stderr / exact, cfg.z))
    return points, all(pt["pass"] for pt in points), {}, {"moment_ratio": plot}


def _v_khinchine(cfg):
    errs = _v_moments(cfg)
    _check_all(errs, "p", cfg.get("p", [2.0]), lambda v: v >= 1, "must be >= 1")
    _check_all(errs, "directions", cfg.get("directions", [50]), _posint, "must be a positive integer")
    return errs


def random_directions(n, count, rng):
    """Gaussian, sparse and heavy-tailed directions in rotation."""
    gen = rng.generator() if isinstance(rng, RngState) else rng
    out = []
    for j in range(count):
        kind = j % 3
        if kind == 0:
            a = gen.standard_normal(n)
        elif kind == 1:
            a = np.zeros(n)
            s = 1 + j % n
            a[:s] = gen.standard_normal(s)
        else:
            a = gen.exponential(size=n) ** 3
        out.append(moments.Direction(a))
    return out


def suite_khinchine(cfg):
    qs = cfg.get("q", [1, 2, 4, 8])
    count = int(cfg.one("directions", 50))
    factor = float(cfg.one("stability", 2.0))
    points, ratios = [], []
    i = 0
    for n in cfg.get("n", [4, 16]):
        dirs = random_directions(n, count, cfg.rng(10_000 + n))
        for p in cfg.get("p", [1.0, 1.5, 2.0, 3.0]):
            meas = sampling.BallMeasure.volume(n, p)
            for j, a in enumerate(dirs):
                ests = moments.functional_moments_mc(a, meas, qs, cfg.rng(i), cfg.samples)
                i += 1
                for q, e in zip(qs, ests):
                    mc = e.value ** (1.0 / q)
                    f = moments.full_moment_formula(a, n, p, q)
                    ratios.append(mc / f)
                    points.append({"n": n, "p": p, "q": q, "direction": j, "mc": mc, "formula": f,
                                   "ratio": mc / f})
    r = np.array(ratios)
    med = float(np.median(r))
    C = float(max(r.max(), 1.0 / r.min()))
    up, down = float(r.max() / med), float(med / r.min())
    verdict = up <= factor and down <= factor
    summary = {"C": C, "median": med, "max_over_median": up, "median_over_min": down, "factor": factor}
    plot = [[k, v, v, v] for k, v in enumerate(ratios)]
    return points, verdict, summary, {"ratio": plot}


def _v_psi2(cfg):
    errs = []
    _check_all(errs, "n", cfg.get("n", [16, 64]), _posint, "must be a positive integer")
    _check_all(errs, "p", cfg.get("p", [1.0]), lambda v: 1 <= v <= 2, "must lie in [1, 2]")
    return errs


def suite_psi2(cfg):
    p = float(cfg.one("p", 1.0))
    points, plot = [], []
    for i, n in enumerate(cfg.get("n", [16, 64])):
        theta = moments.Direction.diagonal(n)
        c, rows = moments.psi_direction_mc(theta, p, cfg.rng(i), cfg.samples)
        pred = moments.psi2_direction_constant(theta, n, p)
        points.append({"n": n, "p": p, "psi2": c, "predicted_order": pred, "moments": rows})
        plot.append([n, c, c, c])
    vals = [pt["psi2"] for pt in points]
    spread = max(vals) / min(vals)
    lo, hi = (float(v) for v in cfg.get("band", [0.5, 2.0]))
    return points, lo <= spread <= hi or (lo <= 1 / spread <= hi), {"spread": spread}, {"psi2": plot}


def _measures(cfg):
    out = []
    for kind in cfg.get("kinds", ["cone", "volume", "gamma-mixed", "projected-cone"]):
        for n in cfg.get("n", [3, 5]):
            for p in cfg.get("p", [0.5, 1.0, 2.0, 4.0]):
                if kind == "gamma-mixed":
                    for a in cfg.get("alpha", [0.5, 3.0]):
                        out.append(sampling.BallMeasure.gamma_mixed(n, p, a))
                elif kind == "projected-cone":
                    for m in cfg.get("m", [2]):
                        out.append(sampling.BallMeasure.projected_cone(n, p, m))
                else:
                    out.append(sampling.BallMeasure(n, p, kind))
    return out


def _v_slabs(cfg):
    errs = _v_sampling(cfg)
    _check_all(errs, "kinds", cfg.get("kinds", ["volume"]), lambda v: v in sampling.KINDS, "unknown kind")
    _check_all(errs, "alpha", cfg.get("alpha", [0.5]), lambda v: v > 0, "must be > 0")
    _check_all(errs, "per_measure", cfg.get("per_measure", [8]), _posint, "must be a positive integer")
    return errs


def suite_slabs(cfg):
    per = int(cfg.one("per_measure", 8))
    level = float(cfg.one("level", 1e-3))
    meas = _measures(cfg)
    grids = []
    for i, m in enumerate(meas):
        g = slabs.quantile_slab_grid(m, cfg.rng(50_000 + i), per // 2, orientation=">=")
        g += slabs.quantile_slab_grid(m, cfg.rng(60_000 + i), per - per // 2, orientation="<=")
        grids.append(g)
    total = sum(len(g) for g in grids)
    points, plot = [], []
    for i, (m, g) in enumerate(zip(meas, grids)):
        rep = slabs.subindependence_verdict(m, g, cfg.rng(i), cfg.samples, cfg.z, level, tests=total)
        for pt in rep["points"]:
            points.append({"measure": rep["measure"], **pt})
            plot.append(_band(len(plot), pt["margin"], pt["margin_stderr"], rep["z"]))
    bad = sum(not pt["pass"] for pt in points)
    summary = {"grid_points": total, "violations": bad, "z": bonferroni_z(level, total, cfg.z)}
    return points, bad == 0, summary, {"margin": plot}


def _v_sections(cfg):
    errs = []
    n = cfg.one("n", 6)
    k = cfg.one("k", 2)
    if not (_posint(n) and _posint(k) and k <= n):
        errs.append("need positive integers k <= n")
    _check_all(errs, "subspaces", cfg.get("subspaces", [10]), _posint, "must be a positive integer")
    kind = cfg.one("subspace", "random")
    if kind not in ("random", "axis", "diagonal"):
        errs.append(f"subspace={kind!r}: expected random, axis or diagonal")
    elif kind == "diagonal" and _posint(n) and _posint(k) and n % k:
        errs.append("diagonal subspace needs k | n")
    return errs


def _subspaces(cfg):
    n, k = int(cfg.one("n", 6)), int(cfg.one("k", 2))
    kind = cfg.one("subspace", "random")
    if kind == "axis":
        return [sections.axis_subspace(n, k)]
    if kind == "diagonal":
        return [sections.diagonal_subspace(n, k)]
    count = int(cfg.one("subspaces", 10))
    return [sections.random_subspace(n, k, cfg.rng(90_000 + j)) for j in range(count)]


def _v_pscan(cfg):
    errs = _v_sections(cfg)
    ps = cfg.get("p", [0.5, 1, 1.5, 2, 3, 4, 6])
    _check_all(errs, "p", ps, _finite_p, "must be finite and > 0")
    if any(b <= a for a, b in zip(ps, ps[1:])):
        errs.append("p grid must be increasing")
    return errs


def suite_pscan(cfg):
    ps = cfg.get("p", [0.5, 1, 1.5, 2, 3, 4, 6])
    points, plot = [], []
    ok = True
    for j, E in enumerate(_subspaces(cfg)):
        rep = sections.theorem8_scan(E, ps, cfg.rng(j), cfg.samples, cfg.z)
        ok &= rep["pass"]
        points.append({"subspace": j, "rows": rep["rows"], "violations": rep["violations"], "pass": rep["pass"]})
        if j == 0:
            plot = [_band(r["p"], r["ratio"], r["stderr"], cfg.z) for r in rep["rows"]]
    return points, bool(ok), {}, {"theorem8": plot}


def _v_lscan(cfg):
    errs = _v_sections(cfg)
    _check_all(errs, "p", cfg.get("p", [1.0, 4.0]), _finite_p, "must be finite and > 0")
    _check_all(errs, "lam", cfg.get("lam", [0, 0.5, 1, 2, 5]), lambda v: v >= 0, "must be >= 0")
    return errs


def suite_lscan(cfg):
    lams = cfg.get("lam", [0, 0.5, 1, 2, 5])
    points, plot = [], []
    ok = True
    i = 0
    for j, E in enumerate(_subspaces(cfg)):
        for p in cfg.get("p", [1.0, 4.0]):
            rep = sections.prop20_r(p, E, lams, cfg.rng(i), cfg.samples, cfg.z)
            i += 1
            ok &= rep["pass"]
            rows = [{"lam": lam, "r": e.value, "stderr": e.stderr} for lam, e in zip(rep["lams"], rep["estimates"])]
            points.append({"subspace": j, "p": p, "rows": rows, "violations": rep["violations"], "pass": rep["pass"]})
            if j == 0 and not plot:
                plot = [_band(r["lam"], r["r"], r["stderr"], cfg.z) for r in rows]
    return points, bool(ok), {}, {"prop20": plot}


def _v_cube(cfg):
    errs = _v_sections(cfg)
    rs = cfg.get("r", [0.5, 1, 1.5, 2, 3])
    _check_all(errs, "r", rs, lambda v: 0 < v < math.inf, "must be finite and > 0")
    if any(b <= a for a, b in zip(rs, rs[1:])):
        errs.append("r grid must be increasing")
    return errs


def suite_cube(cfg):
    rs = cfg.get("r", [0.5, 1, 1.5, 2, 3])
    points, plot = [], []
    ok = True
    for j, E in enumerate(_subspaces(cfg)):
        rep = sections.theorem9_scan(E, rs, cfg.rng(j), cfg.samples, cfg.z)
        ok &= rep["pass"]
        points.append({"subspace": j, "rows": rep["rows"], "violations": rep["violations"], "pass": rep["pass"]})
        if j == 0:
            plot = [_band(r["r"], r["ratio"], r["ratio_stderr"], cfg.z) for r in rep["rows"]]
    return points, bool(ok), {}, {"cube": plot}


def _v_bl(cfg):
    errs = _v_sections(cfg)
    _check_all(errs, "p", cfg.get("p", [3.0, 4.0]), lambda v: 2 <= v < math.inf, "must be finite and >= 2")
    _check_all(errs, "lam", cfg.get("lam", [0.5, 2]), lambda v: v >= 0, "must be >= 0")
    k = cfg.one("k", 2)
    _check_all(errs, "alpha", cfg.get("alpha", [0.5]), lambda v: 0 <= v < k, "must lie in [0, k)")
    for p in cfg.get("p", [3.0, 4.0]):
        _check_all(errs, "beta", cfg.get("beta", [1.0]), lambda v, p=p: 0 <= v <= p, "must lie in [0, p]")
    return errs


def suite_bl(cfg):
    points, plot = [], []
    ok = True
    i = 0
    for j, E in enumerate(_subspaces(cfg)):
        for p in cfg.get("p", [3.0, 4.0]):
            for lam in cfg.get("lam", [0.5, 2]):
                rep = sections.bl_laplace_bound(E, p, lam, cfg.rng(i), cfg.samples, cfg.z)
                i += 1
                ok &= rep["pass"]
                points.append({"subspace": j, "check": "laplace", **rep})
                plot.append(_band(len(plot), rep["margin"], rep["stderr"], cfg.z))
            for beta in cfg.get("beta", [1.0]):
                for a in cfg.get("alpha", [0.5]):
                    rep = sections.corollary21_moments(E, p, beta, a, cfg.rng(i), cfg.samples, cfg.z)
                    i += 1
                    ok &= rep["pass"]
                    points.append({"subspace": j, "check": "moments", **rep})
    return points, bool(ok), {}, {"margin": plot}


def _v_balance(cfg):
    errs = []
    _check_all(errs, "m", cfg.get("m", [16]), lambda v: _posint(v) and v <= apps.MAX_EXHAUSTIVE,
               f"must be an integer in [1, {apps.MAX_EXHAUSTIVE}]")
    _check_all(errs, "d", cfg.get("d", [8]), _posint, "must be a positive integer")
    _check_all(errs, "instances", cfg.get("instances", [20]), _posint, "must be a positive integer")
    return errs


def suite_balance(cfg):
    count = int(cfg.one("instances", 20))
    factor = float(cfg.one("stability", 2.0))
    points, plot, cells = [], [], []
    i = 0
    for m in cfg.get("m", [16]):
        for d in cfg.get("d", [8]):
            consts = []
            for _ in range(count):
                ps = apps.PointSet.random_unit(m, d, cfg.rng(i))
                i += 1
                ex = apps.balance_exhaustive(ps, math.inf)
                gr = apps.balance_greedy(ps, math.inf)
                rep = apps.komlos_bound_check(ps, ex)
                rep["greedy_value"] = gr[1]
                rep["pass"] = gr[1] >= ex[1] - 1e-12
                points.append(rep)
                consts.append(rep["constant"])
                plot.append([len(plot), rep["constant"], rep["constant"], rep["constant"]])
            # the exhaustive minimum keeps shrinking as m grows past d, so
            # stability is judged within each (m, d) cell
            cells.append({"m": m, "d": d, **apps.stability(consts, factor)})
    verdict = all(c["pass"] for c in cells) and all(pt["pass"] for pt in points)
    emp = max(c["max"] for c in cells if c["max"] is not None)
    return points, verdict, {"empirical_C": emp, "cells": cells}, {"constant": plot}


def _v_cover(cfg):
    errs = []
    _check_all(errs, "m", cfg.get("m", [4, 8]), lambda v: _posint(v) and v <= 12, "must be an integer in [1, 12]")
    _check_all(errs, "d", cfg.get("d", [2, 3]), lambda v: _posint(v) and v <= 12, "must be an integer in [1, 12]")
    _check_all(errs, "eps", cfg.get("eps", [0.25, 0.5, 1.0]), lambda v: 0 < v < math.inf, "must be > 0")
    _check_all(errs, "p", cfg.get("p", [2, 4, math.inf]), lambda v: v >= 2, "must be >= 2")
    return errs


def suite_cover(cfg):
    factor = float(cfg.one("stability", 3.0))
    points, plot = [], []
    i = 0
    for d in cfg.get("d", [2, 3]):
        for m in cfg.get("m", [4, 8]):
            ps = apps.PointSet.random_unit(m, d, cfg.rng(i))
            i += 1
            for p in cfg.get("p", [2, 4, math.inf]):
                for eps in cfg.get("eps", [0.25, 0.5, 1.0]):
                    N, _ = apps.covering_count(ps, eps, p)
                    rep = apps.prop26_bound_check(m, eps, p, N)
                    rep.update({"d": d, "instance": ps.instance_hash()})
                    points.append(rep)
                    plot.append([len(plot), rep["constant"], rep["constant"], rep["constant"]])
    # N = 1 gives log N = 0 and carries no information about the constant
    st = apps.stability([pt["constant"] for pt in points if pt["N"] > 1], factor)
    return points, st["pass"], {"stability": st}, {"constant": plot}


SUITE_TABLE = {
    "sampling-oracles": (suite_sampling, _v_sampling),
    "moments": (suite_moments, _v_moments),
    "khinchine": (suite_khinchine, _v_khinchine),
    "psi2": (suite_psi2, _v_psi2),
    "slabs": (suite_slabs, _v_slabs),
    "sections-p-scan": (suite_pscan, _v_pscan),
    "sections-lambda-scan": (suite_lscan, _v_lscan),
    "cube": (suite_cube, _v_cube),
    "brascamp-lieb": (suite_bl, _v_bl),
    "balance": (suite_balance, _v_balance),
    "cover": (suite_cover, _v_cover),
}


# --- running and persistence ----------------------------------------------------------


def output_dir(cfg: ExperimentConfig) -> str:
    return cfg.output or os.environ.get(OUTPUT_ENV) or "lpball-out"


def _report(cfg, points, verdict, summary, plots, wall, interrupted=False):
    rep = {
        "schema_version": SCHEMA_VERSION,
        "library_version": __version__,
        "suite": cfg.suite,
        "config": cfg.echo(),
        "rng": {"seed": cfg.seed, "generator": "PCG64", "streams": "SeedSequence spawn keys per grid point"},
        "points": points,
        "summary": summary,
        "plots": plots,
        "verdict": bool(verdict),
        "interrupted": interrupted,
    }
    rep = _jsonable(rep)
    rep["wall_clock"] = round(wall, 3)
    rep["content_hash"] = content_hash(rep)
    return rep


def run_suite(cfg: ExperimentConfig, write: bool = True) -> dict:
    """Run a suite, persist its report and plot data, and return the report."""
    fn = SUITE_TABLE[cfg.suite][0]
    t0 = time.perf_counter()
    try:
        points, verdict, summary, plots = fn(cfg)
    except KeyboardInterrupt:
        rep = _report(cfg, [], False, {}, {}, time.perf_counter() - t0, interrupted=True)
        if write:
            write_report(rep, output_dir(cfg))
        raise
    rep = _report(cfg, points, verdict, summary, plots, time.perf_counter() - t0)
    if write:
        write_report(rep, output_dir(cfg))
    return rep


def write_report(rep: dict, outdir: str) -> tuple[str, str]:
    os.makedirs(outdir, exist_ok=True)
    jpath = os.path.join(outdir, f"{rep['suite']}.json")
    cpath = os.path.join(outdir, f"{rep['suite']}.csv")
    with open(jpath, "w", encoding="utf-8") as fh:
        json.dump(rep, fh, sort_keys=True, indent=1)
        fh.write("\n")
    plots = rep.get("plots") or {}
    quantity = next(iter(plots), None)
    with open(cpath, "w", encoding="utf-8", newline="") as fh:
        fh.write(emit_plot_data(rep, quantity) if quantity else emit_plot_data({"plots": {}}, None))
    return jpath, cpath


def read_report(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        rep = json.load(fh)
    v = rep.get("schema_version")
    if not isinstance(v, int) or v > SCHEMA_VERSION:
        raise ConfigError(f"unsupported report schema {v!r}")
    return rep


def emit_plot_data(report: dict, quantity) -> str:
    """CSV ``abscissa,value,lo,hi`` for ``quantity``; header only when the
    report holds no data."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["abscissa", "value", "lo", "hi"])
    plots = report.get("plots") or {}
    if not plots and not report.get("points"):
        return buf.getvalue()
    if quantity not in plots:
        raise KeyError(f"unknown quantity {quantity!r}; available: {', '.join(sorted(plots))}")
    for row in plots[quantity]:
        w.writerow([repr(float(v)) if isinstance(v, (int, float)) else v for v in row])
    return buf.getvalue()


def parse_measure_spec(spec: str) -> sampling.BallMeasure:
    """``kind:n=3,p=1.5[,alpha=..][,m=..]``."""
    kind, _, rest = spec.partition(":")
    kv = {}
    for part in filter(None, rest.split(",")):
        k, sep, v = part.partition("=")
        if not sep:
            raise ConfigError(f"bad measure parameter {part!r}")
        kv[k.strip()] = _scalar(v)
    try:
        return sampling.BallMeasure(int(kv.pop("n")), float(kv.pop("p")), kind.strip(),
                                    alpha=kv.pop("alpha", None), m=kv.pop("m", None))
    except KeyError as exc:
        raise ConfigError(f"measure spec is missing {exc.args[0]}") from None
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def report_diff(a: dict, b: dict) -> list[str]:
    out = []
    if a.get("content_hash") != b.get("content_hash"):
        out.append(f"content_hash: {a.get('content_hash')} != {b.get('content_hash')}")
    for key in ("suite", "config", "verdict", "summary"):
        if a.get(key) != b.get(key):
            out.append(f"{key} differs")
    pa, pb = a.get("points", []), b.get("points", [])
    if len(pa) != len(pb):
        out.append(f"point count {len(pa)} != {len(pb)}")
    for i, (x, y) in enumerate(zip(pa, pb)):
        if x != y:
            out.append(f"point {i} differs")
    return out


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="lpball", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run a suite from a config file")
    r.add_argument("config")
    r.add_argument("--output", help="output directory")
    pl = sub.add_parser("plot", help="emit plot data from a report")
    pl.add_argument("report")
    pl.add_argument("quantity")
    sm = sub.add_parser("sample", help="draw samples as CSV")
    sm.add_argument("measure", help="e.g. volume:n=3,p=1.5 or gamma-mixed:n=3,p=2,alpha=0.5")
    sm.add_argument("count", type=int)
    sm.add_argument("--seed", type=int, default=0)
    rd = sub.add_parser("report-diff", help="compare two reports")
    rd.add_argument("a")
    rd.add_argument("b")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code == 0 else 2

    try:
        if args.cmd == "run":
            cfg = ExperimentConfig.from_file(args.config)
            if args.output:
                cfg.output = args.output
            rep = run_suite(cfg)
            status = "PASS" if rep["verdict"] else "FAIL"
            print(f"{cfg.suite}: {status} ({len(rep['points'])} points) hash={rep['content_hash'][:16]} "
                  f"-> {output_dir(cfg)}")
            return 0 if rep["verdict"] else 1
        if args.cmd == "plot":
            sys.stdout.write(emit_plot_data(read_report(args.report), args.quantity))
            return 0
        if args.cmd == "sample":
            if args.count < 1:
                raise ConfigError("count must be >= 1")
            meas = parse_measure_spec(args.measure)
            x = meas.sample(args.count, RngState(args.seed).generator())
            sampling.write_samples_csv(x, sys.stdout)
            return 0
        diffs = report_diff(read_report(args.a), read_report(args.b))
        for line in diffs:
            print(line)
        return 1 if diffs else 0
    except (ConfigError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
