"""Seeded RNG streams, Monte Carlo estimates and KS calibration."""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy import stats as _st

__all__ = [
    "RngState",
    "Estimate",
    "InsufficientSamplesWarning",
    "MIN_SAMPLES",
    "mean_estimate",
    "ratio_estimate",
    "root_estimate",
    "ks_critical_one_sample",
    "ks_critical_two_sample",
    "ks_one_sample",
    "ks_two_sample",
    "bonferroni_z",
]

MIN_SAMPLES = 1000
_KS_EXACT_MAX = 10_000


class InsufficientSamplesWarning(UserWarning):
    pass


@dataclass(frozen=True)
class RngState:
    """A (seed, stream) pair naming an independent, reproducible generator.

    Streams are spawned through ``SeedSequence`` so distinct stream ids give
    statistically independent PCG64 sequences.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.PCG64(ss))

    def child(self, stream: int) -> "RngState":
        # nested streams are folded into a single integer key
        return RngState(self.seed, self.stream * 1_000_003 + int(stream) + 1)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return np.random.default_rng(rng)
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")


@dataclass(frozen=True)
class Estimate:
    value: float
    stderr: float
    samples: int
    seed: RngState | None = None

    @property
    def lo(self) -> float:
        return self.value - 3.0 * self.stderr

    @property
    def hi(self) -> float:
        return self.value + 3.0 * self.stderr

    def within(self, target: float, z: float = 3.0) -> bool:
        return abs(self.value - target) <= z * self.stderr + 1e-15 * max(1.0, abs(target))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["seed"] = None if self.seed is None else [self.seed.seed, self.seed.stream]
        return d


def mean_estimate(x, seed: RngState | None = None) -> Estimate:
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2:
        raise ValueError("need at least two samples")
    sd = float(x.std(ddof=1))
    return Estimate(float(x.mean()), sd / math.sqrt(n), n, seed)


def ratio_estimate(num, den, seed: RngState | None = None) -> Estimate:
    """Estimate ``E num / E den`` from paired samples (delta method)."""
    num = np.asarray(num, dtype=float)
    den = np.asarray(den, dtype=float)
    n = num.size
    mn, md = num.mean(), den.mean()
    r = mn / md
    infl = (num - r * den) / md
    return Estimate(float(r), float(infl.std(ddof=1) / math.sqrt(n)), n, seed)


def root_estimate(est: Estimate, q: float, warn_rel: float = 0.05) -> Estimate:
    """Map an estimate of ``m`` to one of ``m**(1/q)`` by the delta method."""
    v = est.value ** (1.0 / q)
    se = est.stderr * v / (q * est.value) if est.value > 0 else math.inf
    out = Estimate(v, se, est.samples, est.seed)
    if est.samples < MIN_SAMPLES or (v > 0 and se / v > warn_rel):
        warnings.warn(
            f"relative stderr {se / v if v else math.inf:.3g} with {est.samples} samples",
            InsufficientSamplesWarning,
            stacklevel=2,
        )
    return out


def ks_critical_one_sample(n: int, level: float = 1e-3) -> float:
    """Critical value of the one-sample KS statistic at significance ``level``.

    Exact finite-n distribution up to 10^4 samples, Kolmogorov limit beyond.
    """
    if n <= _KS_EXACT_MAX:
        return float(_st.kstwo.isf(level, n))
    return float(_st.kstwobign.isf(level) / math.sqrt(n))


def ks_critical_two_sample(n: int, m: int, level: float = 1e-3) -> float:
    c = math.sqrt(-0.5 * math.log(level / 2.0))
    return c * math.sqrt((n + m) / (n * m))


def ks_one_sample(x, cdf, level: float = 1e-3) -> tuple[float, float, bool]:
    """Return (statistic, critical value, passed)."""
    x = np.sort(np.asarray(x, dtype=float))
    n = x.size
    F = cdf(x)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    crit = ks_critical_one_sample(n, level)
    return d, crit, d <= crit


def ks_two_sample(x, y, level: float = 1e-3) -> tuple[float, float, bool]:
    x = np.sort(np.asarray(x, dtype=float))
    y = np.sort(np.asarray(y, dtype=float))
    allv = np.concatenate([x, y])
    fx = np.searchsorted(x, allv, side="right") / x.size
    fy = np.searchsorted(y, allv, side="right") / y.size
    d = float(np.max(np.abs(fx - fy)))
    crit = ks_critical_two_sample(x.size, y.size, level)
    return d, crit, d <= crit


def bonferroni_z(level: float, tests: int, z_min: float = 3.0) -> float:
    """One-sided z threshold for family-wise ``level`` over ``tests`` checks."""
    return max(z_min, float(_st.norm.isf(level / max(tests, 1))))
