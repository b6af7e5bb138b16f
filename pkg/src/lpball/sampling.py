"""Exact samplers for radial measures on the l_p^n ball.

All measures are built from one ingredient: a vector ``G`` of i.i.d.
generalized Gaussians with density ``exp(-|t|^p) / (2 Gamma(1 + 1/p))``,
whose coordinates satisfy ``|g_i|^p ~ gamma(1/p, 1)``.

* cone measure on the sphere:      ``G / ||G||_p``
* normalized volume:               ``G / (||G||_p^p + Z)^(1/p)``, ``Z ~ Exp(1)``
* gamma-mixed(a):                  ``G / (||G||_p^p + W)^(1/p)``, ``W ~ gamma(a, 1)``
* projected cone (m extra coords): first ``n`` coordinates of a cone sample
  in dimension ``n + m``; same law as gamma-mixed(m / p).

Samplers return arrays of shape ``(size, n)``.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .specfun import as_p, log_gamma
from .stats import as_generator

__all__ = [
    "BallMeasure",
    "KINDS",
    "gamma_variates",
    "sample_generalized_gaussian",
    "sample_cone",
    "sample_cone_with_radius",
    "sample_volume",
    "sample_gamma_mixed",
    "sample_projected_cone",
    "sample_measure",
    "radial_density",
    "radial_cdf",
    "lp_norm",
    "write_samples_csv",
]

KINDS = ("cone", "volume", "gamma-mixed", "projected-cone")


def lp_norm(x, p, axis=-1):
    """l_p (quasi-)norm along ``axis``; ``p`` may be ``inf``."""
    p = float(as_p(p).p)
    ax = np.abs(np.asarray(x, dtype=float))
    if math.isinf(p):
        return ax.max(axis=axis)
    if p == 2.0:
        return np.sqrt(np.sum(ax * ax, axis=axis))
    if p == 1.0:
        return ax.sum(axis=axis)
    return np.sum(ax**p, axis=axis) ** (1.0 / p)


def _mt_gamma(a, size, gen):
    # Marsaglia-Tsang squeeze/rejection, valid for a >= 1
    d = a - 1.0 / 3.0
    c = 1.0 / math.sqrt(9.0 * d)
    out = np.empty(size)
    filled = 0
    while filled < size:
        need = size - filled
        m = int(need * 1.05) + 32
        x = gen.standard_normal(m)
        v = 1.0 + c * x
        u = gen.random(m)
        pos = v > 0
        v3 = np.where(pos, v, 1.0) ** 3
        x2 = x * x
        ok = pos & (
            (u < 1.0 - 0.0331 * x2 * x2)
            | (np.log(u) < 0.5 * x2 + d * (1.0 - v3 + np.log(v3)))
        )
        acc = d * v3[ok]
        take = min(acc.size, need)
        out[filled:filled + take] = acc[:take]
        filled += take
    return out


def gamma_variates(shape: float, size: int, rng) -> np.ndarray:
    """Draw ``size`` variates from gamma(shape, 1).

    For ``shape < 1`` uses ``gamma(a) = gamma(a + 1) * U^(1/a)``, computed
    in log space so that tiny shapes do not lose all precision.
    """
    if not shape > 0:
        raise ValueError("gamma shape must be positive")
    gen = as_generator(rng)
    size = int(size)
    if shape >= 1.0:
        return _mt_gamma(shape, size, gen)
    g = _mt_gamma(shape + 1.0, size, gen)
    u = gen.random(size)
    return np.exp(np.log(g) + np.log1p(-u) / shape)


def _gg_block(n, p, size, gen):
    # returns G (size, n) and ||G||_p^p, never zero
    w = gamma_variates(1.0 / p, size * n, gen).reshape(size, n)
    sign = np.where(gen.random((size, n)) < 0.5, -1.0, 1.0)
    g = sign * w ** (1.0 / p)
    s = w.sum(axis=1)
    bad = ~(s > 0)
    while bad.any():
        k = int(bad.sum())
        w2 = gamma_variates(1.0 / p, k * n, gen).reshape(k, n)
        s2 = np.where(gen.random((k, n)) < 0.5, -1.0, 1.0)
        g[bad] = s2 * w2 ** (1.0 / p)
        s[bad] = w2.sum(axis=1)
        bad = ~(s > 0)
    return g, s


def _check(n, p):
    p = as_p(p)
    if p.is_inf:
        raise ValueError("samplers require finite p")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    return int(n), p.p


def sample_generalized_gaussian(p, rng, size=None):
    """Variates with density ``exp(-|t|^p) / (2 Gamma(1 + 1/p))``."""
    _, pp = _check(1, p)
    gen = as_generator(rng)
    m = 1 if size is None else int(np.prod(size))
    w = gamma_variates(1.0 / pp, m, gen)
    sign = np.where(gen.random(m) < 0.5, -1.0, 1.0)
    out = sign * w ** (1.0 / pp)
    if size is None:
        return float(out[0])
    return out.reshape(size)


def sample_cone_with_radius(n, p, rng, size=1):
    """Return ``(G / ||G||_p, ||G||_p)`` for ``size`` draws."""
    n, pp = _check(n, p)
    g, s = _gg_block(n, pp, int(size), as_generator(rng))
    r = s ** (1.0 / pp)
    return g / r[:, None], r


def sample_cone(n, p, rng, size=1):
    return sample_cone_with_radius(n, p, rng, size)[0]


def sample_volume(n, p, rng, size=1):
    n, pp = _check(n, p)
    gen = as_generator(rng)
    g, s = _gg_block(n, pp, int(size), gen)
    z = gen.standard_exponential(int(size))
    return g / ((s + z) ** (1.0 / pp))[:, None]


def sample_gamma_mixed(n, p, alpha, rng, size=1):
    n, pp = _check(n, p)
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    gen = as_generator(rng)
    g, s = _gg_block(n, pp, int(size), gen)
    w = gamma_variates(alpha, int(size), gen)
    return g / ((s + w) ** (1.0 / pp))[:, None]


def sample_projected_cone(n, p, m, rng, size=1):
    n, pp = _check(n, p)
    if int(m) != m or m < 1:
        raise ValueError("m must be a positive integer")
    y = sample_cone(n + int(m), pp, rng, size)
    return np.ascontiguousarray(y[:, :n])


@dataclass(frozen=True)
class BallMeasure:
    """A radial probability measure on B_p^n (or on its boundary, for cone)."""

    n: int
    p: float
    kind: str = "volume"
    alpha: float | None = None
    m: int | None = None

    def __post_init__(self):
        _check(self.n, self.p)
        object.__setattr__(self, "p", float(as_p(self.p).p))
        if self.kind not in KINDS:
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "gamma-mixed" and not (self.alpha is not None and self.alpha > 0):
            raise ValueError("gamma-mixed needs alpha > 0")
        if self.kind == "projected-cone" and not (self.m is not None and int(self.m) == self.m and self.m >= 1):
            raise ValueError("projected-cone needs an integer m >= 1")

    @classmethod
    def cone(cls, n, p):
        return cls(n, p, "cone")

    @classmethod
    def volume(cls, n, p):
        return cls(n, p, "volume")

    @classmethod
    def gamma_mixed(cls, n, p, alpha):
        return cls(n, p, "gamma-mixed", alpha=float(alpha))

    @classmethod
    def projected_cone(cls, n, p, m):
        return cls(n, p, "projected-cone", m=int(m))

    @property
    def mixing_shape(self) -> float | None:
        """Shape of the gamma mixing variable, ``None`` for the cone measure."""
        if self.kind == "cone":
            return None
        if self.kind == "volume":
            return 1.0
        if self.kind == "gamma-mixed":
            return float(self.alpha)
        return self.m / self.p

    def sample(self, size, rng):
        return sample_measure(self, size, rng)

    def label(self) -> str:
        extra = ""
        if self.kind == "gamma-mixed":
            extra = f",alpha={self.alpha:g}"
        elif self.kind == "projected-cone":
            extra = f",m={self.m}"
        return f"{self.kind}(n={self.n},p={self.p:g}{extra})"


def sample_measure(measure: BallMeasure, size, rng):
    k = measure.kind
    if k == "cone":
        return sample_cone(measure.n, measure.p, rng, size)
    if k == "volume":
        return sample_volume(measure.n, measure.p, rng, size)
    if k == "gamma-mixed":
        return sample_gamma_mixed(measure.n, measure.p, measure.alpha, rng, size)
    return sample_projected_cone(measure.n, measure.p, measure.m, rng, size)


def _radial_args(measure):
    if measure.kind == "cone":
        raise ValueError("the cone measure has a deterministic radius")
    return measure.n, measure.p, measure.mixing_shape


def radial_density(measure: BallMeasure, r):
    """Density of ``||X||_p`` on [0, 1]:
    ``n Gamma(n/p + a) / (Gamma(a) Gamma(n/p + 1)) r^(n-1) (1 - r^p)^(a-1)``.
    """
    n, p, a = _radial_args(measure)
    r = np.asarray(r, dtype=float)
    logc = math.log(n) + log_gamma(n / p + a) - log_gamma(a) - log_gamma(n / p + 1.0)
    inside = (r >= 0) & (r <= 1)
    rr = np.clip(r, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        val = np.exp(logc) * rr ** (n - 1) * (1.0 - rr**p) ** (a - 1.0)
    out = np.where(inside, val, 0.0)
    return float(out) if out.ndim == 0 else out


def radial_cdf(measure: BallMeasure, r):
    """``P(||X||_p <= r)``; ``||X||_p^p`` is Beta(n/p, a)."""
    n, p, a = _radial_args(measure)
    r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
    out = special.betainc(n / p, a, r**p)
    return float(out) if out.ndim == 0 else out


def write_samples_csv(samples, fh=None) -> str | None:
    """Write one vector per row; floats in shortest round-trip form."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    own = fh is None
    if own:
        fh = io.StringIO()
    w = csv.writer(fh, lineterminator="\n")
    w.writerow([f"x{i + 1}" for i in range(samples.shape[1])])
    for row in samples:
        w.writerow([repr(float(v)) for v in row])
    return fh.getvalue() if own else None
