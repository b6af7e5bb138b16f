"""Moments of linear functionals on B_p^n, Khinchine-type constants, psi_alpha norms."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from .sampling import BallMeasure, lp_norm, sample_measure
from .specfun import as_p, log_gamma
from .stats import Estimate, RngState, as_generator, mean_estimate, root_estimate

__all__ = [
    "Direction",
    "PSI_Q_GRID",
    "marginal_abs_moment_exact",
    "gamma_ratio_moment",
    "gk_estimate",
    "functional_moment_mc",
    "functional_moments_mc",
    "full_moment_formula",
    "khinchine_constants",
    "psi_alpha_norm",
    "psi2_direction_constant",
    "psi_direction_mc",
    "moment_scan_csv",
]

PSI_Q_GRID = (1, 2, 4, 8, 12, 16, 20)
_CHUNK = 1 << 17


@dataclass(frozen=True)
class Direction:
    a: np.ndarray = field(repr=False)

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).ravel()
        if a.size == 0 or not np.any(a != 0):
            raise ValueError("direction must be a nonzero vector")
        if not np.all(np.isfinite(a)):
            raise ValueError("direction must be finite")
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def n(self) -> int:
        return self.a.size

    @property
    def order(self) -> np.ndarray:
        # stable so ties keep their original order
        return np.argsort(-np.abs(self.a), kind="stable")

    @property
    def sorted_abs(self) -> np.ndarray:
        return np.abs(self.a)[self.order]

    def normalized(self) -> "Direction":
        return Direction(self.a / np.linalg.norm(self.a))

    @classmethod
    def e1(cls, n):
        a = np.zeros(n)
        a[0] = 1.0
        return cls(a)

    @classmethod
    def diagonal(cls, n, k=None):
        """``(1, ..., 1, 0, ..., 0) / sqrt(k)`` with ``k`` ones (default ``n``)."""
        k = n if k is None else k
        a = np.zeros(n)
        a[:k] = 1.0 / math.sqrt(k)
        return cls(a)


def _as_dir(a) -> Direction:
    return a if isinstance(a, Direction) else Direction(a)


def _log_gamma_ratio(n, p, q):
    return log_gamma(n / p + 1.0) - log_gamma((n + q) / p + 1.0)


def marginal_abs_moment_exact(n: int, p: float, q: float) -> float:
    """Normalized-volume average of ``|x_1|^q`` over B_p^n."""
    p = as_p(p).p
    if q < 0:
        raise ValueError("q must be >= 0")
    lv = (
        log_gamma(n / p + 1.0)
        + log_gamma((q + 1.0) / p + 1.0)
        - math.log(q + 1.0)
        - log_gamma(1.0 / p + 1.0)
        - log_gamma((n + q) / p + 1.0)
    )
    return math.exp(lv)


def gamma_ratio_moment(n: int, p: float, q: float) -> float:
    """``Gamma(n/p + 1) / Gamma((n+q)/p + 1)``.

    Equals ``E[(||G||_p^p / (||G||_p^p + Z))^(q/p)] / E||G||_p^q``.
    """
    p = as_p(p).p
    return math.exp(_log_gamma_ratio(n, p, q))


def _pnorm(v, p):
    if v.size == 0:
        return 0.0
    return float(lp_norm(v, p))


def gk_estimate(a, p: float, q: float) -> float:
    """Two-regime moment proxy for ``(E|sum a_i g_i|^q)^(1/q)``.

    ``q^(1/p) ||head||_{p'} + sqrt(q) ||tail||_2`` where ``head`` is the
    ``floor(q)`` largest ``|a_i|`` and ``tail`` the rest.
    """
    pe = as_p(p)
    if pe.p < 1 or q < 1:
        raise ValueError("need p, q >= 1")
    s = _as_dir(a).sorted_abs
    k = int(math.floor(q))
    head, tail = s[:k], s[k:]
    return q ** (1.0 / pe.p) * _pnorm(head, pe.dual) + math.sqrt(q) * _pnorm(tail, 2.0)


def full_moment_formula(a, n: int, p: float, q: float) -> float:
    a = _as_dir(a)
    if a.n != n:
        raise ValueError("direction dimension does not match n")
    return gk_estimate(a, p, q) / max(n, q) ** (1.0 / as_p(p).p)


def _projections(a: Direction, measure: BallMeasure, samples: int, gen):
    out = np.empty(samples)
    done = 0
    while done < samples:
        m = min(_CHUNK, samples - done)
        x = sample_measure(measure, m, gen)
        out[done:done + m] = x @ a.a
        done += m
    return out


def functional_moments_mc(a, measure: BallMeasure, qs, rng, samples: int = 100_000):
    """Raw moment estimates ``E|<a, X>|^q`` for each ``q`` from one sample pool."""
    a = _as_dir(a)
    if a.n != measure.n:
        raise ValueError("direction dimension does not match the measure")
    seed = rng if isinstance(rng, RngState) else None
    y = np.abs(_projections(a, measure, int(samples), as_generator(rng)))
    return [mean_estimate(y**q, seed) for q in qs]


def functional_moment_mc(a, measure: BallMeasure, q: float, rng, samples: int = 100_000) -> Estimate:
    """``(E|<a, X>|^q)^(1/q)`` under ``measure``, stderr by the delta method.

    Emits ``InsufficientSamplesWarning`` when the relative stderr exceeds 5%.
    """
    if q < 1:
        raise ValueError("q must be >= 1")
    raw = functional_moments_mc(a, measure, [q], rng, samples)[0]
    return root_estimate(raw, q)


def khinchine_constants(p: float, q: float, n: int) -> tuple[float, float]:
    """Order of the best constants (A, B) in
    ``A ||a||_2 <= (E_vol |<a, X>|^q)^(1/q) <= B ||a||_2``.
    """
    p = as_p(p).p
    if p < 1 or q < 1:
        raise ValueError("need p, q >= 1")
    small = math.sqrt(q) / n ** (1.0 / p) * min(1.0, math.sqrt(n / q))
    big = min(1.0, (q / n) ** (1.0 / p))
    return (small, big) if p <= 2 else (big, small)


def psi_alpha_norm(moments, alpha: float) -> float:
    """``sup_q q^(-1/alpha) m_q`` over a grid of ``(q, m_q)`` pairs."""
    moments = list(moments)
    if not moments:
        raise ValueError("empty moment grid")
    if not 1 <= alpha <= 2:
        raise ValueError("alpha must lie in [1, 2]")
    best = -math.inf
    for q, m in moments:
        if q < 1 or not m > 0:
            raise ValueError("need q >= 1 and positive moments")
        best = max(best, q ** (-1.0 / alpha) * m)
    return best


def psi2_direction_constant(theta, n: int, p: float) -> float:
    """Order of the psi_2 constant of direction ``theta`` on B_p^n, p in [1, 2]."""
    pe = as_p(p)
    if not 1 <= pe.p <= 2:
        raise ValueError("p must lie in [1, 2]")
    t = np.asarray(theta.a if isinstance(theta, Direction) else theta, dtype=float)
    if abs(np.linalg.norm(t) - 1.0) > 1e-9:
        raise ValueError("theta must be a unit vector")
    return n ** (1.0 / pe.p - 0.5) * _pnorm(t, pe.dual)


def psi_direction_mc(theta, p: float, rng, samples: int = 200_000, alpha: float = 2.0, qs=PSI_Q_GRID):
    """Estimated psi_alpha constant of ``theta`` for the uniform measure on B_p^n.

    Returns ``(constant, rows)`` with ``constant = sup_q q^(-1/alpha) m_q / m_2``
    and one ``(q, m_q)`` row per grid point.
    """
    theta = _as_dir(theta)
    measure = BallMeasure.volume(theta.n, p)
    qs = sorted(set(qs) | {2})
    raw = functional_moments_mc(theta, measure, qs, rng, samples)
    m = {q: e.value ** (1.0 / q) for q, e in zip(qs, raw)}
    rows = [(q, m[q]) for q in qs]
    return psi_alpha_norm([(q, v / m[2]) for q, v in rows], alpha), rows


def moment_scan_csv(rows) -> str:
    """Rows of (n, p, q, direction_id, mc_value, stderr, formula_value)."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "p", "q", "direction_id", "mc_value", "stderr", "formula_value", "ratio"])
    for n, p, q, did, mc, se, f in rows:
        w.writerow([n, repr(float(p)), repr(float(q)), did, repr(float(mc)), repr(float(se)),
                    repr(float(f)), repr(float(mc / f))])
    return buf.getvalue()
