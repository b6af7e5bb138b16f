"""Special functions, quadrature and closed-form constants.

Everything here is a pure function of its arguments. Gamma ratios are
evaluated in log space; ``p = inf`` is handled by explicit branches.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

__all__ = [
    "PExponent",
    "QuadratureSpec",
    "QuadratureError",
    "DEFAULT_QUAD",
    "as_p",
    "log_gamma",
    "log_ball_volume",
    "ball_volume",
    "alpha",
    "gauss_abs_moment",
    "gg_abs_moment",
    "theta",
    "tail_integral",
    "quad",
]


class QuadratureError(ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


@dataclass(frozen=True)
class PExponent:
    """An exponent ``p`` in ``(0, inf]`` together with its dual."""

    p: float

    def __post_init__(self):
        p = float(self.p)
        if math.isnan(p) or p <= 0:
            raise ValueError(f"p must be in (0, inf], got {self.p!r}")
        object.__setattr__(self, "p", p)

    @property
    def is_inf(self) -> bool:
        return math.isinf(self.p)

    @property
    def dual(self) -> float:
        # only meaningful for p >= 1; for p < 1 the conjugate is negative
        if self.is_inf:
            return 1.0
        if self.p == 1.0:
            return math.inf
        return self.p / (self.p - 1.0)

    def __float__(self):
        return self.p


def as_p(p) -> PExponent:
    return p if isinstance(p, PExponent) else PExponent(p)


@dataclass(frozen=True)
class QuadratureSpec:
    rtol: float = 1e-10
    limit: int = 200

    def __post_init__(self):
        if not (0 < self.rtol <= 1e-4):
            raise ValueError("rtol must lie in (0, 1e-4]")
        if self.limit < 16:
            raise ValueError("limit must be >= 16")


DEFAULT_QUAD = QuadratureSpec()


def quad(f, a, b, q: QuadratureSpec = DEFAULT_QUAD, points=None):
    """Adaptive Gauss-Kronrod quadrature that raises instead of warning."""
    kw = dict(epsabs=0.0, epsrel=q.rtol, limit=q.limit, full_output=1)
    if points is not None and np.isfinite(b):
        kw["points"] = points
    out = integrate.quad(f, a, b, **kw)
    val, err = out[0], out[1]
    if len(out) > 3 and out[2]["last"] >= q.limit:
        raise QuadratureError(f"quadrature hit subdivision limit; est. error {err:.3g}", err)
    if err > max(10 * q.rtol * abs(val), 1e-300):
        raise QuadratureError(
            f"quadrature error {err:.3g} exceeds tolerance for value {val:.6g}", err
        )
    return val


def log_gamma(x: float) -> float:
    """``ln Gamma(x)`` for ``x > 0``."""
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x!r}")
    return float(special.gammaln(x))


def log_ball_volume(n: int, p) -> float:
    p = as_p(p)
    if n < 1:
        raise ValueError("n must be >= 1")
    if p.is_inf:
        return n * math.log(2.0)
    return n * (math.log(2.0) + log_gamma(1.0 / p.p + 1.0)) - log_gamma(n / p.p + 1.0)


def ball_volume(n: int, p) -> float:
    """Lebesgue volume of the unit l_p ball in R^n.

    Raises OverflowError rather than returning inf (or 0.0 on underflow).
    """
    if as_p(p).is_inf:
        if n > 1023:
            raise OverflowError("2^n is not representable")
        return math.ldexp(1.0, n)
    lv = log_ball_volume(n, p)
    if lv > 709.0 or lv < -745.0:
        raise OverflowError(f"vol(B_p^n) = exp({lv:.6g}) is not representable")
    return math.exp(lv)


def alpha(p, lam: float, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``2 * int_0^inf exp(-lam t^p - t^2) dt``."""
    p = as_p(p)
    if p.is_inf:
        raise ValueError("alpha requires finite p")
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if lam == 0:
        return math.sqrt(math.pi)
    pp = p.p
    # integrand is below 1e-300 well before t = 27
    return 2.0 * quad(lambda t: math.exp(-lam * t**pp - t * t), 0.0, 27.0, q,
                      points=[0.5, 1.0, 2.0, 4.0])


def gauss_abs_moment(p: float) -> float:
    """``E|g|^p`` for a standard normal ``g``."""
    if p < 0:
        raise ValueError("p must be >= 0")
    return math.exp(0.5 * p * math.log(2.0) + log_gamma((p + 1.0) / 2.0) - 0.5 * math.log(math.pi))


def gg_abs_moment(p, q: float) -> float:
    """q-th absolute moment of the density ``exp(-|t|^p) / (2 Gamma(1 + 1/p))``."""
    p = as_p(p)
    if p.is_inf:
        raise ValueError("gg_abs_moment requires finite p")
    if q < 0:
        raise ValueError("q must be >= 0")
    pp = p.p
    return math.exp(log_gamma((q + 1.0) / pp + 1.0) - math.log(q + 1.0) - log_gamma(1.0 / pp + 1.0))


def theta(r):
    """``int_{-r}^{r} exp(-t^2/2) dt``; accepts scalars or arrays."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("theta requires r > 0")
    out = math.sqrt(2.0 * math.pi) * special.erf(r / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def tail_integral(t: float, p, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``int_t^inf exp(-u^p) du`` for ``t > 0``.

    Integrates ``exp(t^p - (t+s)^p)`` over ``s`` and rescales, so the
    quadrature works at O(1) magnitude even when the tail underflows.
    """
    return math.exp(log_tail_integral(t, p, q))


def log_tail_integral(t: float, p, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    p = as_p(p)
    if p.is_inf:
        raise ValueError("tail_integral requires finite p")
    if not t > 0:
        raise ValueError("t must be > 0")
    pp = p.p
    tp = t**pp
    if pp == 1.0:
        return -t
    # decay scale of the shifted integrand near s = 0 is 1 / (p t^(p-1))
    scale = 1.0 / (pp * t ** (pp - 1.0))
    if pp > 1.0:
        scale = min(scale, 1.0)
    upper = scale * 800.0

    def f(s):
        return math.exp(tp - (t + s) ** pp)

    brk = [scale * c for c in (0.5, 2.0, 8.0, 32.0, 128.0)]
    val = quad(f, 0.0, upper, q, points=brk)
    return -tp + math.log(val)
