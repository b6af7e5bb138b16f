"""Gaussian geometry of k-dimensional sections of B_p^n.

Conventions
-----------
A subspace ``E`` is stored as a ``k x n`` matrix with orthonormal rows. A
standard Gaussian on ``E`` is ``Z @ basis`` with ``Z`` standard on R^k, and
the gauge of ``E ∩ B_p^n`` at such a point is its ambient l_p norm.

Comparisons against R^k reuse the same ``Z`` (``||Z||_p`` is then the l_p
norm of a standard Gaussian on R^k). Paired sampling makes the estimators
exact whenever the two sides agree sample-by-sample (``p = 2``, coordinate
subspaces, block diagonals) and shrinks the variance elsewhere.

Monotonicity along a scan fails only if a later point exceeds an earlier
one by more than ``z`` combined standard errors.
"""
from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from .sampling import lp_norm
from .specfun import DEFAULT_QUAD, QuadratureSpec, alpha, gauss_abs_moment, log_gamma, quad, theta
from .stats import Estimate, RngState, as_generator, mean_estimate, ratio_estimate

__all__ = [
    "Subspace",
    "HeavyTailWarning",
    "ExtrapolationWarning",
    "random_subspace",
    "diagonal_subspace",
    "axis_subspace",
    "gaussian_on",
    "cube_moment_exact",
    "section_moment",
    "effective_sample_size",
    "theorem8_ratio",
    "theorem8_scan",
    "laplace_functional",
    "laplace_cube_exact",
    "prop18_F",
    "prop18_scan",
    "prop20_r",
    "TiltedDensity",
    "CubeDensity",
    "predicted_order",
    "peaked_compare",
    "cube_density_compare",
    "lemma15_check",
    "lemma22_check",
    "CONVEX_FAMILY",
    "power_convex_order_check",
    "gamma_cube",
    "cube_section_gaussian",
    "theorem9_scan",
    "theorem10_bound",
    "bl_laplace_bound",
    "corollary21_moments",
    "corollary19_suite",
    "sphere_gauss_convert",
    "volume_ratio",
    "monotone_violations",
    "scan_csv",
]

_ORTHO_TOL = 1e-12


class HeavyTailWarning(UserWarning):
    pass


class ExtrapolationWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Subspace:
    basis: np.ndarray = field(repr=False)

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.basis, dtype=float))
        k, n = b.shape
        if not 1 <= k <= n:
            raise ValueError("need 1 <= k <= n")
        if np.max(np.abs(b @ b.T - np.eye(k))) > _ORTHO_TOL * 10 * n:
            raise ValueError("basis rows are not orthonormal")
        b = b.copy()
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def k(self) -> int:
        return self.basis.shape[0]

    @property
    def n(self) -> int:
        return self.basis.shape[1]

    def embed(self, z):
        return np.asarray(z) @ self.basis

    def to_text(self) -> str:
        buf = io.StringIO()
        for row in self.basis:
            buf.write(" ".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "Subspace":
        rows = [[float(t) for t in line.split()] for line in text.splitlines() if line.strip()]
        return cls(np.array(rows))


def random_subspace(n: int, k: int, rng) -> Subspace:
    """Haar-distributed k-dimensional subspace of R^n."""
    if not 1 <= k <= n:
        raise ValueError("need 1 <= k <= n")
    gen = as_generator(rng)
    while True:
        a = gen.standard_normal((n, k))
        q, r = np.linalg.qr(a)
        d = np.diag(r)
        if np.min(np.abs(d)) > 1e-10:
            break
    q = q * np.sign(d)
    return Subspace(q.T)


def diagonal_subspace(n: int, k: int) -> Subspace:
    """Block main diagonal ``{(y, ..., y) : y in R^k}`` for ``k | n``."""
    if k < 1 or n % k:
        raise ValueError("k must divide n")
    m = n // k
    b = np.zeros((k, n))
    for j in range(k):
        b[j, j::k] = 1.0 / math.sqrt(m)
    return Subspace(b)


def axis_subspace(n: int, k: int) -> Subspace:
    return Subspace(np.eye(n)[:k])


def gaussian_on(E: Subspace, size: int, rng):
    """Return ``(Z, X)``: Z standard on R^k, ``X = Z @ basis`` standard on E."""
    z = as_generator(rng).standard_normal((int(size), E.k))
    return z, z @ E.basis


def _norms(E, p, size, rng):
    z, x = gaussian_on(E, size, rng)
    return lp_norm(x, p), lp_norm(z, p)


def _seed(rng):
    return rng if isinstance(rng, RngState) else None


def cube_moment_exact(k: int, p: float) -> float:
    """``E ||G||_p^p`` for G standard Gaussian on R^k."""
    return k * gauss_abs_moment(p)


def sphere_gauss_convert(k: int, beta: float) -> float:
    """``E ||G||_2^beta = 2^(beta/2) Gamma((k+beta)/2) / Gamma(k/2)`` on R^k."""
    if beta <= -k:
        raise ValueError("need beta > -k")
    return math.exp(0.5 * beta * math.log(2.0) + log_gamma((k + beta) / 2.0) - log_gamma(k / 2.0))


def section_moment(E: Subspace, p: float, beta: float, rng, samples: int = 100_000) -> Estimate:
    """``E ||G||_p^beta`` for G standard Gaussian on E."""
    if beta <= -E.k:
        raise ValueError("need beta > -k for a finite moment")
    if beta < -E.k / 2:
        warnings.warn("negative moment beyond -k/2 has infinite variance", HeavyTailWarning, stacklevel=2)
    if beta == 0:
        return Estimate(1.0, 0.0, int(samples), _seed(rng))
    ne, _ = _norms(E, p, samples, as_generator(rng))
    return mean_estimate(ne**beta, _seed(rng))


def effective_sample_size(values) -> float:
    """Kish effective sample size ``(sum v)^2 / sum v^2`` of positive weights."""
    v = np.asarray(values, dtype=float)
    return float(v.sum() ** 2 / np.sum(v * v))


def theorem8_ratio(E: Subspace, p: float, rng, samples: int = 100_000) -> Estimate:
    """``E ||G||_{E∩B_p^n}^p / E ||G||_{B_p^k}^p``, denominator exact."""
    est = section_moment(E, p, p, rng, samples)
    c = cube_moment_exact(E.k, p)
    return Estimate(est.value / c, est.stderr / c, est.samples, est.seed)


def monotone_violations(values, stderrs, direction: str = "nonincreasing", z: float = 3.0):
    """Index pairs ``(i, j)``, ``i < j``, certified to break the monotonicity."""
    v = np.asarray(values, dtype=float)
    s = np.asarray(stderrs, dtype=float)
    sign = 1.0 if direction == "nonincreasing" else -1.0
    bad = []
    for i in range(v.size):
        for j in range(i + 1, v.size):
            if sign * (v[j] - v[i]) > z * math.hypot(s[i], s[j]) + 1e-12 * max(1.0, abs(v[i])):
                bad.append((i, j))
    return bad


def theorem8_scan(E: Subspace, p_grid, rng, samples: int = 100_000, z: float = 3.0) -> dict:
    """Ratio sequence over ``p_grid`` from one Gaussian pool; asserts it is nonincreasing."""
    ps = [float(p) for p in p_grid]
    if any(b <= a for a, b in zip(ps, ps[1:])):
        raise ValueError("p grid must be increasing")
    _, x = gaussian_on(E, samples, as_generator(rng))
    rows = []
    for p in ps:
        c = cube_moment_exact(E.k, p)
        est = mean_estimate(lp_norm(x, p) ** p)
        rows.append({"p": p, "ratio": est.value / c, "stderr": est.stderr / c})
    bad = monotone_violations([r["ratio"] for r in rows], [r["stderr"] for r in rows], "nonincreasing", z)
    return {"k": E.k, "n": E.n, "rows": rows, "violations": bad, "pass": not bad}


def laplace_functional(E: Subspace, p: float, lam: float, theta_exp: float = 1.0, rng=None,
                       samples: int = 100_000) -> Estimate:
    """``E exp(-lam ||G||_p^(theta p))`` on E."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    if not 0 < theta_exp <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if lam == 0:
        return Estimate(1.0, 0.0, int(samples), _seed(rng))
    ne, _ = _norms(E, p, samples, as_generator(rng))
    return mean_estimate(np.exp(-lam * ne ** (theta_exp * p)), _seed(rng))


def laplace_cube_exact(k: int, p: float, lam: float, q: QuadratureSpec = DEFAULT_QUAD) -> float:
    """``E exp(-lam ||G||_p^p)`` on R^k, via ``alpha``."""
    return (alpha(p, lam * 2.0 ** (p / 2.0), q) / math.sqrt(math.pi)) ** k


def prop18_F(p: float, E: Subspace, lam: float, rng, samples: int = 100_000) -> Estimate:
    """Laplace ratio with exponent ``lam ||G||_p^p / (2^(p/2) Gamma((p+1)/2))``."""
    if not lam > 0:
        raise ValueError("lam must be > 0")
    c = lam / (2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0))
    ne, nk = _norms(E, p, samples, as_generator(rng))
    return ratio_estimate(np.exp(-c * ne**p), np.exp(-c * nk**p), _seed(rng))


def prop18_scan(E: Subspace, p_grid, lam: float, rng, samples: int = 100_000, z: float = 3.0) -> dict:
    """F over ``p_grid`` (common Gaussian pool). Monotonicity is asserted
    only on (0, 2]; for p >= 2 only ``F(p) >= 1`` is asserted."""
    gen = as_generator(rng)
    z_, x = gaussian_on(E, samples, gen)
    rows = []
    for p in p_grid:
        c = lam / (2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0))
        est = ratio_estimate(np.exp(-c * lp_norm(x, p) ** p), np.exp(-c * lp_norm(z_, p) ** p))
        rows.append({"p": float(p), "F": est.value, "stderr": est.stderr})
    low = [r for r in rows if r["p"] <= 2]
    bad = monotone_violations([r["F"] for r in low], [r["stderr"] for r in low], "nondecreasing", z)
    below_one = [r["p"] for r in rows if r["p"] >= 2 and r["F"] < 1 - z * r["stderr"] - 1e-12]
    return {"rows": rows, "violations": bad, "below_one": below_one, "pass": not bad and not below_one}


def prop20_r(p: float, E: Subspace, lam_grid, rng, samples: int = 100_000, z: float = 3.0) -> dict:
    """``r_p(lam)`` along ``lam_grid``; nonincreasing for p <= 2, nondecreasing for p >= 2."""
    lams = [float(v) for v in lam_grid]
    if any(v < 0 for v in lams):
        raise ValueError("lam must be >= 0")
    ne, nk = _norms(E, p, samples, as_generator(rng))
    ep, kp = ne**p, nk**p
    ests = []
    for lam in lams:
        if lam == 0:
            ests.append(Estimate(1.0, 0.0, int(samples), _seed(rng)))
        else:
            ests.append(ratio_estimate(np.exp(-lam * ep), np.exp(-lam * kp), _seed(rng)))
    order = sorted(range(len(lams)), key=lambda i: lams[i])
    vals = [ests[i].value for i in order]
    ses = [ests[i].stderr for i in order]
    if p == 2:
        bad = monotone_violations(vals, ses, "nonincreasing", z) + monotone_violations(vals, ses, "nondecreasing", z)
    else:
        bad = monotone_violations(vals, ses, "nonincreasing" if p < 2 else "nondecreasing", z)
    return {"p": float(p), "lams": lams, "estimates": ests, "violations": bad, "pass": not bad}


# --- one-dimensional peaked orderings -------------------------------------------------


@dataclass(frozen=True)
class TiltedDensity:
    """``exp(-lam a^p |t|^p - a^2 t^2)`` with ``a = alpha(p, lam)``; a probability density."""

    p: float
    lam: float

    def __post_init__(self):
        if not (self.p > 0 and math.isfinite(self.p)):
            raise ValueError("p must be finite and positive")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")

    @property
    def norm_const(self) -> float:
        return alpha(self.p, self.lam)

    def pdf(self, t):
        a = self.norm_const
        t = np.abs(np.asarray(t, dtype=float))
        return np.exp(-self.lam * a**self.p * t**self.p - a * a * t * t)

    @property
    def cutoff(self) -> float:
        # beyond this the density is below 1e-16 of its peak value 1
        return math.sqrt(37.0) / self.norm_const

    def mass(self, a: float, q: QuadratureSpec = DEFAULT_QUAD) -> float:
        """``mu([-a, a])``."""
        if a <= 0:
            return 0.0
        c = self.norm_const
        lam, p = self.lam, self.p
        b = min(a, self.cutoff)
        return 2.0 * quad(lambda t: math.exp(-lam * c**p * t**p - c * c * t * t), 0.0, b, q)


def predicted_order(d1: TiltedDensity, d2: TiltedDensity):
    """Which density is more peaked, per the five comparison cases.

    Returns ``(case, relation)`` with relation ``"<"`` (d1 ≺ d2), ``">"``
    (d2 ≺ d1) or ``"="``, or ``None`` when no case applies.
    """
    if d1 == d2:
        return ("identical", "=")
    if d1.p == d2.p:
        p = d1.p
        if p == 2:
            return ("gaussian", "=")
        if p < 2:
            return ("d", "<" if d1.lam > d2.lam else ">")
        return ("e", "<" if d1.lam < d2.lam else ">")
    flip = d1.p > d2.p
    lo, hi = (d2, d1) if flip else (d1, d2)
    lo_prec_hi = {"<": ">", ">": "<"} if flip else {"<": "<", ">": ">"}
    if lo.p < 2 <= hi.p:
        return ("c", lo_prec_hi["<"])
    a_lo, a_hi = lo.norm_const, hi.norm_const
    if hi.p >= 2 and a_lo > a_hi:
        return ("a", lo_prec_hi["<"])
    if hi.p < 2 and a_lo < a_hi:
        return ("b", lo_prec_hi["<"])
    return None


def peaked_compare(d1: TiltedDensity, d2: TiltedDensity, a_grid, tol: float = 1e-8) -> dict:
    """Interval masses of both densities on ``a_grid`` and the predicted ordering."""
    pred = predicted_order(d1, d2)
    rows = [{"a": float(a), "mass1": d1.mass(a), "mass2": d2.mass(a)} for a in a_grid]
    if pred is None:
        ok = None
    else:
        rel = pred[1]
        m1 = np.array([r["mass1"] for r in rows])
        m2 = np.array([r["mass2"] for r in rows])
        if rel == "<":
            ok = bool(np.all(m1 <= m2 + tol))
        elif rel == ">":
            ok = bool(np.all(m2 <= m1 + tol))
        else:
            ok = bool(np.all(np.abs(m1 - m2) <= tol))
    return {"case": None if pred is None else pred[0],
            "relation": None if pred is None else pred[1],
            "rows": rows, "pass": ok}


@dataclass(frozen=True)
class CubeDensity:
    """``exp(-theta(r)^2 t^2 / 2)`` restricted to ``|t| <= r / theta(r)``."""

    r: float

    def __post_init__(self):
        if not self.r > 0:
            raise ValueError("r must be > 0")

    @property
    def theta(self) -> float:
        return theta(self.r)

    @property
    def half_width(self) -> float:
        return self.r / self.theta

    def mass(self, a: float) -> float:
        if a <= 0:
            return 0.0
        th = self.theta
        b = min(a, self.half_width)
        return math.sqrt(2.0 * math.pi) / th * special.erf(th * b / math.sqrt(2.0))

    def mass_quad(self, a: float, q: QuadratureSpec = DEFAULT_QUAD) -> float:
        if a <= 0:
            return 0.0
        th = self.theta
        b = min(a, self.half_width)
        return 2.0 * quad(lambda t: math.exp(-th * th * t * t / 2.0), 0.0, b, q)


def cube_density_compare(r: float, s: float, a_grid, tol: float = 1e-8) -> dict:
    """For ``r > s`` the wider-support density ``rho_r`` is less peaked."""
    if not r > s > 0:
        raise ValueError("need r > s > 0")
    dr, ds = CubeDensity(r), CubeDensity(s)
    rows = [{"a": float(a), "mass_r": dr.mass_quad(a), "mass_s": ds.mass_quad(a)} for a in a_grid]
    ok = all(row["mass_r"] <= row["mass_s"] + tol for row in rows)
    return {"r": r, "s": s, "rows": rows, "pass": ok}


def lemma15_check(p: float, q: float, lam: float, quad_spec: QuadratureSpec = DEFAULT_QUAD) -> dict:
    """``alpha(p, lam/Gamma((p+1)/2)) < alpha(q, lam/Gamma((q+1)/2))`` for p < q."""
    if not 0 < p < q:
        raise ValueError("need 0 < p < q")
    a_p = alpha(p, lam / math.gamma((p + 1.0) / 2.0), quad_spec)
    a_q = alpha(q, lam / math.gamma((q + 1.0) / 2.0), quad_spec)
    return {"alpha_p": a_p, "alpha_q": a_q, "gap": a_q - a_p, "pass": a_p < a_q}


def _bl_psi(s, p, lam, q=DEFAULT_QUAD):
    c = lam * s ** (2.0 - p)
    return 2.0 * quad(lambda t: math.exp(-c * t**p - t * t / 2.0), 0.0, 40.0, q, points=[1.0, 4.0, 10.0])


def lemma22_check(p: float, lam: float, t_grid=None, tol: float = 1e-9) -> dict:
    """Numerical concavity of ``log psi`` and of ``t -> t log psi(1/sqrt t)``,
    ``psi(s) = 2 int_0^inf exp(-lam s^(2-p) t^p - t^2/2) dt``, p > 2."""
    if not p > 2:
        raise ValueError("need p > 2")
    t = np.geomspace(0.05, 20.0, 21) if t_grid is None else np.asarray(t_grid, dtype=float)
    s = np.geomspace(0.05, 20.0, 21)
    logpsi_s = np.array([math.log(_bl_psi(v, p, lam)) for v in s])
    f = np.array([v * math.log(_bl_psi(1.0 / math.sqrt(v), p, lam)) for v in t])

    def concave(x, y):
        # chord test on consecutive triples of a nonuniform grid
        ok = True
        for i in range(1, len(x) - 1):
            w = (x[i] - x[i - 1]) / (x[i + 1] - x[i - 1])
            if y[i] < (1 - w) * y[i - 1] + w * y[i + 1] - tol * max(1.0, abs(y[i])):
                ok = False
        return ok

    nondecreasing = bool(np.all(np.diff(logpsi_s) >= -tol))
    return {
        "log_psi_nondecreasing": nondecreasing,
        "log_psi_concave": concave(s, logpsi_s),
        "f_concave": concave(t, f),
        "pass": nondecreasing and concave(s, logpsi_s) and concave(t, f),
    }


# convex test functions with derivatives (for the delta-method stderr)
CONVEX_FAMILY = {
    "linear": (lambda t: t, lambda t: np.ones_like(t)),
    "square": (lambda t: t * t, lambda t: 2.0 * t),
    "hinge_0.5": (lambda t: np.maximum(t - 0.5, 0.0), lambda t: (t > 0.5).astype(float)),
    "hinge_2": (lambda t: np.maximum(t - 2.0, 0.0), lambda t: (t > 2.0).astype(float)),
    "abs_dev": (lambda t: np.abs(t - 1.0), lambda t: np.sign(t - 1.0)),
    "exp_half": (lambda t: np.exp(-0.5 * t), lambda t: -0.5 * np.exp(-0.5 * t)),
}


def _normalized_mean(x, pw, f, fp):
    # E f(X^pw / E X^pw) with its influence function
    y = x**pw
    m = y.mean()
    a = y / m
    fa = f(a)
    infl = fa - fa.mean() - np.mean(fp(a) * a) * (a - 1.0)
    return fa.mean(), infl


def power_convex_order_check(x, p: float, q: float, functions=None, z: float = 3.0) -> dict:
    """``E f(X^p / E X^p) <= E f(X^q / E X^q)`` for convex ``f`` on a sample of X >= 0."""
    if not 0 < p < q:
        raise ValueError("need 0 < p < q")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("X must be nonnegative")
    funcs = CONVEX_FAMILY if functions is None else functions
    yq = x**q
    tail_share = float(yq.max() / yq.sum()) if yq.sum() > 0 else 0.0
    rows = []
    ok = True
    n = x.size
    for name, (f, fp) in funcs.items():
        lp, ip = _normalized_mean(x, p, f, fp)
        lq, iq = _normalized_mean(x, q, f, fp)
        se = float((ip - iq).std(ddof=1) / math.sqrt(n))
        diff = float(lp - lq)
        passed = diff <= z * se + 1e-12 * max(1.0, abs(lq))
        ok &= passed
        rows.append({"f": name, "lhs": float(lp), "rhs": float(lq), "diff": diff, "stderr": se, "pass": bool(passed)})
    return {"p": p, "q": q, "rows": rows, "tail_share": tail_share,
            "heavy_tail": tail_share > 0.01, "pass": bool(ok)}


# --- cube sections ----------------------------------------------------------------------


def gamma_cube(k: int, r: float) -> float:
    """Standard Gaussian measure of ``r B_inf^k``."""
    return float(special.erf(r / math.sqrt(2.0))) ** k


def cube_section_gaussian(E: Subspace, r: float, rng, samples: int = 100_000) -> Estimate:
    if not r > 0:
        raise ValueError("r must be > 0")
    _, x = gaussian_on(E, samples, as_generator(rng))
    return mean_estimate((np.abs(x).max(axis=1) <= r).astype(float), _seed(rng))


def theorem9_scan(E: Subspace, r_grid, rng, samples: int = 100_000, z: float = 3.0) -> dict:
    """Ratio ``gamma_E(E ∩ r B_inf^n) / gamma_k(r B_inf^k)`` over increasing ``r``.

    Asserts a nonincreasing ratio, the lower bound ``gamma_E >= gamma_k(r)``
    and the upper bound ``gamma_E <= gamma_k(r sqrt(n/k))``.
    """
    rs = [float(r) for r in r_grid]
    if any(b <= a for a, b in zip(rs, rs[1:])) or rs[0] <= 0:
        raise ValueError("r grid must be positive and increasing")
    z_, x = gaussian_on(E, samples, as_generator(rng))
    me = np.abs(x).max(axis=1)
    mk = np.abs(z_).max(axis=1)
    scale = math.sqrt(E.n / E.k)
    rows = []
    for r in rs:
        ie = (me <= r).astype(float)
        ik = (mk <= r).astype(float)
        iu = (mk <= r * scale).astype(float)
        ge = mean_estimate(ie)
        ratio = ratio_estimate(ie, ik)
        lower = mean_estimate(ie - ik)
        upper = mean_estimate(iu - ie)
        rows.append({
            "r": r,
            "gamma_E": ge.value,
            "stderr": ge.stderr,
            "gamma_k": gamma_cube(E.k, r),
            "gamma_k_upper": gamma_cube(E.k, r * scale),
            "ratio": ratio.value,
            "ratio_stderr": ratio.stderr,
            "lower_margin": lower.value,
            "lower_stderr": lower.stderr,
            "upper_margin": upper.value,
            "upper_stderr": upper.stderr,
            "lower_ok": lower.value >= -z * lower.stderr - 1e-15,
            "upper_ok": upper.value >= -z * upper.stderr - 1e-15,
        })
    bad = monotone_violations([r["ratio"] for r in rows], [r["ratio_stderr"] for r in rows], "nonincreasing", z)
    ok = not bad and all(r["lower_ok"] and r["upper_ok"] for r in rows)
    return {"k": E.k, "n": E.n, "rows": rows, "violations": bad, "pass": ok}


def theorem10_bound(E: Subspace, r: float, rng, samples: int = 100_000, z: float = 3.0) -> dict:
    rep = theorem9_scan(E, [r], rng, samples, z)
    row = rep["rows"][0]
    return {"r": r, "gamma_E": row["gamma_E"], "stderr": row["stderr"],
            "bound": row["gamma_k_upper"], "margin": row["upper_margin"],
            "margin_stderr": row["upper_stderr"], "pass": bool(row["upper_ok"])}


def bl_laplace_bound(E: Subspace, p: float, lam: float, rng, samples: int = 100_000, z: float = 3.0) -> dict:
    """``E e^{-lam ||G||_E^p} <= E e^{-lam (k/n)^{(p-2)/2} ||G||_{R^k}^p}`` for p >= 2."""
    if p < 2 or lam < 0:
        raise ValueError("need p >= 2 and lam >= 0")
    ne, nk = _norms(E, p, samples, as_generator(rng))
    c = (E.k / E.n) ** ((p - 2.0) / 2.0)
    lhs = np.exp(-lam * ne**p)
    rhs = np.exp(-lam * c * nk**p)
    d = mean_estimate(lhs - rhs)
    return {"p": p, "lam": lam, "lhs": float(lhs.mean()), "rhs": float(rhs.mean()),
            "rhs_exact": laplace_cube_exact(E.k, p, lam * c) if lam > 0 else 1.0,
            "margin": -d.value, "stderr": d.stderr, "pass": bool(d.value <= z * d.stderr + 1e-15)}


def corollary21_moments(E: Subspace, p: float, beta: float, alpha_: float, rng,
                        samples: int = 100_000, z: float = 3.0) -> dict:
    """For p >= 2: ``E||G||_E^beta >= (k/n)^{beta(1/2-1/p)} E||G||_k^beta`` and
    ``E||G||_E^{-alpha} <= (n/k)^{alpha(1/2-1/p)} E||G||_k^{-alpha}``."""
    if p < 2 or not 0 <= beta <= p or not 0 <= alpha_ < E.k:
        raise ValueError("need p >= 2, 0 <= beta <= p, 0 <= alpha < k")
    ne, nk = _norms(E, p, samples, as_generator(rng))
    e = 0.5 - 1.0 / p
    pos = mean_estimate(ne**beta - (E.k / E.n) ** (beta * e) * nk**beta)
    neg = mean_estimate(ne ** (-alpha_) - (E.n / E.k) ** (alpha_ * e) * nk ** (-alpha_))
    ok_pos = pos.value >= -z * pos.stderr - 1e-12
    ok_neg = neg.value <= z * neg.stderr + 1e-12
    return {"p": p, "beta": beta, "alpha": alpha_,
            "positive_margin": pos.value, "positive_stderr": pos.stderr, "positive_pass": bool(ok_pos),
            "negative_margin": -neg.value, "negative_stderr": neg.stderr, "negative_pass": bool(ok_neg),
            "negative_ess": effective_sample_size(ne ** (-alpha_)) if alpha_ > 0 else float(samples),
            "pass": bool(ok_pos and ok_neg)}


def corollary19_suite(E: Subspace, p: float, alpha_: float, beta: float, rng,
                      samples: int = 100_000, z: float = 3.0) -> dict:
    """Section vs. R^k moments: for p < 2, negative moments shrink and
    positive moments (beta <= p) grow; reversed for p > 2; equal at p = 2."""
    if not 0 < alpha_ < E.k or not 0 < beta <= p:
        raise ValueError("need 0 < alpha < k and 0 < beta <= p")
    if alpha_ > E.k / 2:
        warnings.warn("negative moment beyond -k/2 has infinite variance", HeavyTailWarning, stacklevel=2)
    ne, nk = _norms(E, p, samples, as_generator(rng))
    neg = mean_estimate(ne ** (-alpha_) - nk ** (-alpha_))
    pos = mean_estimate(ne**beta - nk**beta)
    pos_ratio = float(np.mean(ne**beta) / np.mean(nk**beta))
    neg_ratio = float(np.mean(ne ** (-alpha_)) / np.mean(nk ** (-alpha_)))

    def check(est, sign):
        # sign = +1: est >= 0 expected; -1: est <= 0; 0: est == 0
        tol = z * est.stderr + 1e-12
        if sign > 0:
            return est.value >= -tol
        if sign < 0:
            return est.value <= tol
        return abs(est.value) <= tol

    if p < 2:
        sn, sp = -1, 1
    elif p > 2:
        sn, sp = 1, -1
    else:
        sn = sp = 0
    ok_neg, ok_pos = check(neg, sn), check(pos, sp)
    return {"p": p, "alpha": alpha_, "beta": beta,
            "negative_diff": neg.value, "negative_stderr": neg.stderr, "negative_ratio": neg_ratio,
            "negative_ess": effective_sample_size(ne ** (-alpha_)),
            "positive_diff": pos.value, "positive_stderr": pos.stderr, "positive_ratio": pos_ratio,
            "pass": bool(ok_neg and ok_pos)}


def volume_ratio(E: Subspace, p: float, rng, samples: int = 100_000, method: str = "sphere",
                 lam_grid=None):
    """``vol_k(E ∩ B_p^n) / vol_k(B_p^k)``.

    ``method="sphere"`` (default): polar integration writes both volumes as
    spherical averages of ``||theta||_p^{-k}``; the ratio comes from one pool
    of uniform directions on the sphere of E (bounded integrand).

    ``method="extrapolate"``: large-``lam`` limit of ``r_p(lam)``. The
    Laplace ratio behaves like ``r_inf + c1 lam^(-2/p) + c2 lam^(-4/p)``;
    a weighted least-squares fit over ``lam_grid`` gives ``r_inf``. Returns
    ``(Estimate, residual)`` where ``residual`` is the largest fit residual
    in units of the point stderr.
    """
    if method not in ("sphere", "extrapolate"):
        raise ValueError("method must be 'sphere' or 'extrapolate'")
    exact = E.k == E.n
    if method == "sphere":
        if exact:
            return Estimate(1.0, 0.0, int(samples), _seed(rng))
        z, x = gaussian_on(E, samples, as_generator(rng))
        r = np.sqrt(np.sum(z * z, axis=1))
        ue = lp_norm(x, p) / r
        uk = lp_norm(z, p) / r
        return ratio_estimate(ue ** (-E.k), uk ** (-E.k), _seed(rng))
    if lam_grid is None:
        # P(||G||_p < lam^(-1/p)) ~ lam^(-k/p): keep that above ~1e-2.5 so the
        # largest lam still sees samples
        top = min(1e4, 10.0 ** (2.5 * p / E.k))
        lam_grid = np.geomspace(top / 100.0, top, 7)
    lams = np.asarray(lam_grid, dtype=float)
    if exact:
        return Estimate(1.0, 0.0, int(samples), _seed(rng)), 0.0
    ne, nk = _norms(E, p, samples, as_generator(rng))
    ep, kp = ne**p, nk**p
    ests = [ratio_estimate(np.exp(-lam * ep), np.exp(-lam * kp)) for lam in lams]
    y = np.array([e.value for e in ests])
    se = np.array([max(e.stderr, 1e-300) for e in ests])
    X = np.column_stack([np.ones_like(lams), lams ** (-2.0 / p), lams ** (-4.0 / p)])
    W = X / se[:, None]
    coef, *_ = np.linalg.lstsq(W, y / se, rcond=None)
    # stderr of the intercept, treating the points as independent
    w = np.linalg.pinv(W)[0] / se
    est = Estimate(float(coef[0]), float(np.sqrt(np.sum((w * se) ** 2))), int(samples), _seed(rng))
    resid = float(np.max(np.abs(y - X @ coef) / se))
    if resid > 3.0:
        warnings.warn(f"volume-ratio extrapolation unstable (residual {resid:.3g} stderr)",
                      ExtrapolationWarning, stacklevel=2)
    return est, resid


def scan_csv(rows, columns) -> str:
    """CSV with the given columns; floats written in shortest round-trip form."""
    import csv

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return "" if v is None else str(v)
