"""Monte Carlo checks of sub-independence of coordinate slabs.

For every measure produced by ``G / (||G||_p^p + W)^(1/p)`` the joint
probability that all coordinates clear their thresholds is at most the
product of the marginal probabilities. The claim is one-sided, so a grid
point fails only when ``joint - product`` exceeds ``z`` standard errors of
that difference; ``z`` is Bonferroni-corrected over the grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .sampling import BallMeasure, sample_cone, sample_measure
from .stats import Estimate, RngState, as_generator, bonferroni_z

__all__ = [
    "SlabSpec",
    "StepFunction",
    "slab_estimates",
    "joint_slab_prob",
    "product_slab_prob",
    "subindependence_verdict",
    "quantile_slab_grid",
    "fkg_monotone_check",
]

OUTER = ">="
INNER = "<="


@dataclass(frozen=True)
class SlabSpec:
    thresholds: tuple
    orientation: str = OUTER

    def __post_init__(self):
        s = tuple(float(v) for v in np.ravel(self.thresholds))
        if not s:
            raise ValueError("empty threshold vector")
        if any(not (0.0 <= v <= 1.0) for v in s):
            raise ValueError("thresholds must lie in [0, 1]")
        if self.orientation not in (OUTER, INNER):
            raise ValueError("orientation must be '>=' or '<='")
        object.__setattr__(self, "thresholds", s)

    @property
    def n(self) -> int:
        return len(self.thresholds)

    def indicators(self, x):
        s = np.asarray(self.thresholds)
        ax = np.abs(x)
        return ax >= s if self.orientation == OUTER else ax <= s

    def to_dict(self):
        return {"thresholds": list(self.thresholds), "orientation": self.orientation}


def _joint_product(F, seed=None):
    """Joint mean of the row products, product of column means, and their
    difference, with stderrs from the per-sample influence functions."""
    F = np.asarray(F, dtype=float)
    N, n = F.shape
    joint_s = F.prod(axis=1)
    P = F.mean(axis=0)
    prod = float(np.prod(P))
    # d prod / d P_i = prod_{j != i} P_j, computed without dividing by zero
    grads = np.empty(n)
    for i in range(n):
        grads[i] = np.prod(np.delete(P, i))
    infl_prod = (F - P) @ grads
    infl_joint = joint_s - joint_s.mean()
    rt = math.sqrt(N)
    J = Estimate(float(joint_s.mean()), float(infl_joint.std(ddof=1) / rt), N, seed)
    Pr = Estimate(prod, float(infl_prod.std(ddof=1) / rt), N, seed)
    D = Estimate(J.value - prod, float((infl_joint - infl_prod).std(ddof=1) / rt), N, seed)
    return J, Pr, D


def slab_estimates(measure: BallMeasure, slab: SlabSpec, rng, samples: int = 100_000):
    """(joint, product, joint - product) estimates from one sample pool."""
    if slab.n != measure.n:
        raise ValueError("slab dimension does not match the measure")
    seed = rng if isinstance(rng, RngState) else None
    x = sample_measure(measure, int(samples), as_generator(rng))
    return _joint_product(slab.indicators(x), seed)


def joint_slab_prob(measure, slab, rng, samples: int = 100_000) -> Estimate:
    return slab_estimates(measure, slab, rng, samples)[0]


def product_slab_prob(measure, slab, rng, samples: int = 100_000) -> Estimate:
    return slab_estimates(measure, slab, rng, samples)[1]


def subindependence_verdict(measure: BallMeasure, grid, rng: RngState, samples: int = 100_000,
                            z: float = 3.0, level: float = 1e-3, tests: int | None = None) -> dict:
    """Check ``joint <= product`` at every grid point.

    Point ``i`` uses stream ``rng.child(i)``. ``tests`` overrides the
    Bonferroni family size (use it when several grids share one family).
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty slab grid")
    zz = bonferroni_z(level, tests or len(grid), z)
    points = []
    for i, slab in enumerate(grid):
        J, P, D = slab_estimates(measure, slab, rng.child(i), samples)
        ok = D.value <= zz * D.stderr + 1e-15
        pt = {
            **slab.to_dict(),
            "joint": J.value,
            "joint_stderr": J.stderr,
            "product": P.value,
            "product_stderr": P.stderr,
            "margin": -D.value,
            "margin_stderr": D.stderr,
            "pass": bool(ok),
        }
        if J.value == 0.0 and P.value > 0.0:
            pt["note"] = "estimate below resolution"
        points.append(pt)
    margins = [pt["margin"] for pt in points]
    return {
        "measure": measure.label(),
        "grid_size": len(points),
        "z": zz,
        "samples": int(samples),
        "min_margin": float(min(margins)),
        "violations": sum(not pt["pass"] for pt in points),
        "pass": all(pt["pass"] for pt in points),
        "points": points,
    }


def quantile_slab_grid(measure: BallMeasure, rng, count: int, levels=(0.5, 0.75, 0.9),
                       orientation: str = OUTER, max_active: int = 4, pilot: int = 20_000):
    """Random slabs with thresholds at marginal quantiles of ``|x_i|``.

    Each slab activates between 2 and ``max_active`` coordinates (all of them
    when n == 1); inactive coordinates get the trivial threshold.
    """
    gen = as_generator(rng)
    x = sample_measure(measure, pilot, gen)
    # exchangeable coordinates: pool them for the marginal quantiles
    qv = np.quantile(np.abs(x).ravel(), levels)
    n = measure.n
    lo_act = min(2, n)
    hi_act = min(max_active, n)
    trivial = 0.0 if orientation == OUTER else 1.0
    grid = []
    for _ in range(count):
        k = int(gen.integers(lo_act, hi_act + 1))
        idx = gen.choice(n, size=k, replace=False)
        s = np.full(n, trivial)
        s[idx] = qv[gen.integers(0, len(levels), size=k)]
        grid.append(SlabSpec(tuple(np.clip(s, 0.0, 1.0)), orientation))
    return grid


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous step function ``values[j]`` on ``[breaks[j-1], breaks[j])``."""

    breaks: tuple = ()
    values: tuple = (1.0,)

    def __post_init__(self):
        b = tuple(float(v) for v in self.breaks)
        v = tuple(float(u) for u in self.values)
        if len(v) != len(b) + 1:
            raise ValueError("need len(values) == len(breaks) + 1")
        if any(y < 0 for y in v):
            raise ValueError("step functions must be nonnegative")
        if any(b2 <= b1 for b1, b2 in zip(b, b[1:])):
            raise ValueError("breaks must be strictly increasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", v)

    @classmethod
    def indicator_above(cls, s):
        return cls((s,), (0.0, 1.0))

    @classmethod
    def indicator_below(cls, s):
        # 1 on [0, s], 0 beyond; nudged so that t == s counts as inside
        return cls((np.nextafter(s, np.inf),), (1.0, 0.0))

    def __call__(self, t):
        idx = np.searchsorted(np.asarray(self.breaks), t, side="right")
        return np.asarray(self.values)[idx]

    @property
    def monotonicity(self) -> str:
        d = np.diff(self.values)
        if np.all(d == 0):
            return "const"
        if np.all(d >= 0):
            return "inc"
        if np.all(d <= 0):
            return "dec"
        return "none"


def _predicted_direction(fs, n):
    kinds = {f.monotonicity for f in fs} - {"const"}
    if "none" in kinds:
        return None
    if len(kinds) <= 1:
        return "<="
    if n == 2:
        # on the 2-d sphere |y_2| is a decreasing function of |y_1|, so an
        # inc/dec pair becomes comonotone and Chebyshev's inequality flips
        return ">="
    return None


def fkg_monotone_check(p: float, n: int, functions, rng, samples: int = 200_000,
                       z: float = 3.0) -> dict:
    """Compare ``E prod f_i(|Y_i|)`` with ``prod E f_i(|Y_i|)``, Y ~ cone measure.

    Predicted ``<=`` when all ``f_i`` share one monotonicity; ``>=`` for an
    increasing/decreasing pair in dimension 2; otherwise only reported.
    """
    fs = list(functions)
    if len(fs) != n:
        raise ValueError("need one function per coordinate")
    seed = rng if isinstance(rng, RngState) else None
    y = np.abs(sample_cone(n, p, as_generator(rng), int(samples)))
    F = np.column_stack([f(y[:, i]) for i, f in enumerate(fs)])
    J, P, D = _joint_product(F, seed)
    direction = _predicted_direction(fs, n)
    if direction == "<=":
        ok = D.value <= z * D.stderr + 1e-15
    elif direction == ">=":
        ok = -D.value <= z * D.stderr + 1e-15
    else:
        ok = True
    return {
        "p": float(p),
        "n": int(n),
        "joint": J.value,
        "product": P.value,
        "difference": D.value,
        "difference_stderr": D.stderr,
        "direction": direction,
        "pass": bool(ok),
    }
