"""Vector balancing and covering numbers of symmetric polytopes by l_p balls.

Both bounds in this area hold up to unspecified universal constants, so the
checks here report implied constants per instance; pass/fail is about the
stability of those constants along a grid, never about a particular value.
"""
from __future__ import annotations

import hashlib
import io
import math

import numpy as np
from scipy import integrate, special
from scipy.spatial import ConvexHull, cKDTree

from .sampling import lp_norm
from .specfun import as_p
from .stats import Estimate, RngState, as_generator, mean_estimate

__all__ = [
    "PointSet",
    "MAX_EXHAUSTIVE",
    "balance_exhaustive",
    "balance_greedy",
    "komlos_bound_check",
    "lp_balance_bound_check",
    "covering_count",
    "covering_scan",
    "prop26_bound_check",
    "entropy_interpolate",
    "sudakov_rhs",
    "gaussian_linf_on_span",
    "max_abs_gaussian_mean",
    "stability",
]

MAX_EXHAUSTIVE = 24
_RANK_TOL = 1e-10
_BLOCK_ELEMS = 1 << 22
_MAX_MESH = 3_000_000


class PointSet:
    """``m`` points of R^d stored as the rows of an ``m x d`` array."""

    def __init__(self, points):
        x = np.asarray(points, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise ValueError("points must form a non-empty m x d array")
        if not np.all(np.isfinite(x)):
            raise ValueError("points must be finite")
        x = x.copy()
        x.setflags(write=False)
        self.points = x

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def d(self) -> int:
        return self.points.shape[1]

    def _svd(self):
        _, s, vt = np.linalg.svd(self.points, full_matrices=False)
        r = 0 if s[0] == 0 else int(np.sum(s > _RANK_TOL * s[0]))
        return r, vt[:r]

    @property
    def rank(self) -> int:
        return self._svd()[0]

    def span_basis(self) -> np.ndarray:
        """Orthonormal rows spanning the points (``rank x d``)."""
        return self._svd()[1]

    @property
    def max_norm2(self) -> float:
        return float(np.max(np.sqrt(np.sum(self.points**2, axis=1))))

    def embed(self, d: int) -> "PointSet":
        """Same points padded with zero coordinates up to dimension ``d``."""
        if d < self.d:
            raise ValueError("cannot embed into a smaller dimension")
        return PointSet(np.hstack([self.points, np.zeros((self.m, d - self.d))]))

    def scaled(self, c: float) -> "PointSet":
        return PointSet(c * self.points)

    def instance_hash(self) -> str:
        h = hashlib.sha256()
        h.update(np.asarray(self.points.shape, dtype=np.int64).tobytes())
        h.update(np.ascontiguousarray(self.points).tobytes())
        return h.hexdigest()[:16]

    def to_text(self) -> str:
        buf = io.StringIO()
        for row in self.points:
            buf.write(" ".join(repr(float(v)) for v in row) + "\n")
        return buf.getvalue()

    @classmethod
    def from_text(cls, text: str) -> "PointSet":
        rows = [[float(t) for t in line.split()] for line in text.splitlines() if line.strip()]
        return cls(np.array(rows))

    @classmethod
    def random_unit(cls, m: int, d: int, rng) -> "PointSet":
        x = as_generator(rng).standard_normal((m, d))
        return cls(x / np.sqrt(np.sum(x * x, axis=1))[:, None])

    def __repr__(self):
        return f"PointSet(m={self.m}, d={self.d}, rank={self.rank})"


def _as_points(points) -> PointSet:
    return points if isinstance(points, PointSet) else PointSet(points)


def _sign_table(bits: int) -> np.ndarray:
    # row i: signs for index i, most significant bit first, 0 -> +1, 1 -> -1
    if bits == 0:
        return np.ones((1, 0))
    idx = np.arange(1 << bits)[:, None]
    shifts = np.arange(bits - 1, -1, -1)[None, :]
    return 1.0 - 2.0 * ((idx >> shifts) & 1)


def balance_exhaustive(points, p=math.inf):
    """Sign pattern minimizing ``||sum eps_i x_i||_p`` over all ``2^(m-1)``
    patterns with ``eps_1 = +1``; ties go to the first pattern in
    lexicographic order (``+`` before ``-``).

    Returns ``(signs, value)``.
    """
    ps = _as_points(points)
    pp = as_p(p).p
    m = ps.m
    if m > MAX_EXHAUSTIVE:
        raise ValueError(f"exhaustive search is limited to m <= {MAX_EXHAUSTIVE}; use balance_greedy")
    x = ps.points
    rest = m - 1
    hb = rest // 2
    lb = rest - hb
    hi_signs = _sign_table(hb)
    lo_signs = _sign_table(lb)
    hi_sums = x[0] + hi_signs @ x[1:1 + hb]
    lo_sums = lo_signs @ x[1 + hb:]
    nlo = lo_sums.shape[0]
    block = max(1, _BLOCK_ELEMS // (nlo * ps.d))
    best_val, best_idx = math.inf, -1
    for start in range(0, hi_sums.shape[0], block):
        hs = hi_sums[start:start + block]
        vals = lp_norm(hs[:, None, :] + lo_sums[None, :, :], pp).ravel()
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_idx = float(vals[j]), start * nlo + j
    hi_i, lo_i = divmod(best_idx, nlo)
    signs = np.concatenate([[1.0], hi_signs[hi_i], lo_signs[lo_i]]).astype(int)
    return signs, best_val


def balance_greedy(points, p=math.inf):
    """One sequential pass; each sign minimizes the running partial-sum norm
    (ties to ``+1``). Returns ``(signs, value)``."""
    ps = _as_points(points)
    pp = as_p(p).p
    s = np.zeros(ps.d)
    signs = np.empty(ps.m, dtype=int)
    for i, xi in enumerate(ps.points):
        plus = float(lp_norm(s + xi, pp))
        minus = float(lp_norm(s - xi, pp))
        e = 1 if plus <= minus else -1
        signs[i] = e
        s = s + e * xi
    return signs, float(lp_norm(s, pp))


def _floored_log(v: int) -> float:
    return math.log(max(int(v), 2))


def komlos_bound_check(points, result) -> dict:
    """Implied constant ``value / (sqrt(log d) max_i ||x_i||_2)``, d = span rank."""
    ps = _as_points(points)
    signs, value = result
    d = ps.rank
    mx = ps.max_norm2
    norm = math.sqrt(_floored_log(d)) * mx
    return {
        "instance": ps.instance_hash(),
        "m": ps.m,
        "d_ambient": ps.d,
        "d_span": d,
        "value": float(value),
        "normalizer": norm,
        "constant": float(value) / norm if norm > 0 else 0.0,
        "signs": [int(s) for s in signs],
        "note": "log term floored at log 2",
    }


def lp_balance_bound_check(points, p, result) -> dict:
    """Implied constant ``value / (sqrt(p) d^(1/p) max_i ||x_i||_2)`` for p >= 2."""
    pe = as_p(p)
    if pe.p < 2:
        raise ValueError("need p >= 2")
    if pe.is_inf:
        rep = komlos_bound_check(points, result)
        rep["p"] = math.inf
        rep["note"] += "; p = inf uses the sqrt(log d) normalizer"
        return rep
    ps = _as_points(points)
    signs, value = result
    d = max(ps.rank, 1)
    norm = math.sqrt(pe.p) * d ** (1.0 / pe.p) * ps.max_norm2
    return {
        "instance": ps.instance_hash(),
        "p": pe.p,
        "m": ps.m,
        "d_ambient": ps.d,
        "d_span": ps.rank,
        "value": float(value),
        "normalizer": norm,
        "constant": float(value) / norm if norm > 0 else 0.0,
        "signs": [int(s) for s in signs],
    }


def stability(values, factor: float) -> dict:
    """``max / median <= factor`` over the finite positive values."""
    v = np.array([x for x in values if np.isfinite(x) and x > 0], dtype=float)
    if v.size == 0:
        return {"count": 0, "max": None, "median": None, "ratio": None, "pass": False}
    med = float(np.median(v))
    r = float(v.max() / med)
    return {"count": int(v.size), "max": float(v.max()), "median": med, "ratio": r, "pass": r <= factor}


# --- covering -------------------------------------------------------------------------


def _mesh(ps: PointSet, p: float, delta: float):
    """Grid points (ambient coordinates) such that every point of
    absconv(points) lies within ``delta`` in l_p of some grid point."""
    r = ps.rank
    if r == 0:
        return np.zeros((1, ps.d))
    if r == ps.d:
        basis = np.eye(ps.d)
        # per-coordinate error h/2 gives l_p error (h/2) r^(1/p)
        h = 2.0 * delta / (1.0 if math.isinf(p) else r ** (1.0 / p))
        reach = (h / 2.0) * math.sqrt(r)
    else:
        basis = ps.span_basis()
        # l_p <= l_2 for p >= 2, and l_2 is preserved by the orthonormal basis
        h = 2.0 * delta / math.sqrt(r)
        reach = delta
    y = ps.points @ basis.T
    verts = np.vstack([y, -y])
    lim = np.max(np.abs(verts), axis=0) + reach
    axes = [np.arange(-math.floor(L / h), math.floor(L / h) + 1) * h for L in lim]
    size = math.prod(len(a) for a in axes)
    if size > _MAX_MESH:
        raise ValueError(f"mesh of {size} points exceeds the limit {_MAX_MESH}; increase epsilon")
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, r)
    if r == 1:
        keep = np.abs(grid[:, 0]) <= np.max(np.abs(y)) + reach
    else:
        hull = ConvexHull(verts)
        # facet equations have unit normals: inside iff a.y + b <= 0
        keep = np.all(grid @ hull.equations[:, :-1].T + hull.equations[:, -1] <= reach + 1e-12, axis=1)
    return grid[keep] @ basis


def covering_count(points, epsilon: float, p=2.0, delta: float | None = None):
    """Certified upper bound on the number of ``epsilon`` l_p balls covering
    ``absconv(points)``; returns ``(N, centers)``.

    A mesh at resolution ``delta`` (default ``epsilon / 4``) is covered
    greedily by balls of radius ``epsilon - delta`` centred at mesh points,
    so the resulting balls of radius ``epsilon`` cover the whole polytope.
    """
    ps = _as_points(points)
    pe = as_p(p)
    if pe.p < 2:
        raise ValueError("need p >= 2")
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    delta = epsilon / 4.0 if delta is None else float(delta)
    if not 0 < delta < epsilon:
        raise ValueError("mesh resolution must satisfy 0 < delta < epsilon")
    mesh = _mesh(ps, pe.p, delta)
    tree = cKDTree(mesh)
    covered = np.zeros(len(mesh), dtype=bool)
    centers = []
    radius = epsilon - delta
    for i in range(len(mesh)):
        if covered[i]:
            continue
        centers.append(i)
        covered[tree.query_ball_point(mesh[i], radius, p=pe.p)] = True
    return len(centers), mesh[centers]


def covering_scan(points, eps_grid, p=2.0, m_grid=None) -> dict:
    """Covering counts over ``epsilon`` and nested prefixes of the points.

    ``raw`` holds the greedy counts. ``certified`` takes the smallest valid
    bound: a cover at a smaller radius or of a larger prefix also covers.
    """
    ps = _as_points(points)
    eps = sorted(float(e) for e in eps_grid)
    ms = sorted(int(m) for m in (m_grid or [ps.m]))
    if ms[-1] > ps.m or ms[0] < 1:
        raise ValueError("prefix sizes must lie in [1, m]")
    raw = np.zeros((len(ms), len(eps)), dtype=np.int64)
    for a, m in enumerate(ms):
        sub = PointSet(ps.points[:m])
        for b, e in enumerate(eps):
            raw[a, b] = covering_count(sub, e, p)[0]
    cert = raw.copy()
    for a in range(len(ms) - 1, -1, -1):
        for b in range(len(eps)):
            if a + 1 < len(ms):
                cert[a, b] = min(cert[a, b], cert[a + 1, b])
            if b > 0:
                cert[a, b] = min(cert[a, b], cert[a, b - 1])
    return {"eps": eps, "m": ms, "p": as_p(p).p, "raw": raw.tolist(), "certified": cert.tolist()}


def prop26_bound_check(m: int, epsilon: float, p, N: int) -> dict:
    """Implied constant ``log N eps^(p/(p-1)) / log m`` (log m floored at log 2)."""
    pe = as_p(p)
    if pe.p < 2:
        raise ValueError("need p >= 2")
    if N < 1:
        raise ValueError("N must be >= 1")
    expo = 1.0 if pe.is_inf else pe.p / (pe.p - 1.0)
    rep = {
        "m": int(m),
        "epsilon": float(epsilon),
        "p": pe.p,
        "N": int(N),
        "exponent": expo,
        "constant": math.log(N) * epsilon**expo / _floored_log(m),
        "note": "log m floored at log 2",
    }
    if pe.p == 2:
        rep["regime"] = "p = 2, the classical Carl-Pajor range"
    return rep


def entropy_interpolate(e_k_2: float, e_k_inf: float, p) -> float:
    """``e_2^(2/p) e_inf^(1 - 2/p)``."""
    pe = as_p(p)
    if pe.p < 2:
        raise ValueError("need p >= 2")
    if not (e_k_2 > 0 and e_k_inf > 0):
        raise ValueError("entropy numbers must be positive")
    if pe.is_inf:
        return float(e_k_inf)
    if pe.p == 2 or e_k_2 == e_k_inf:
        return float(e_k_2)
    t = 2.0 / pe.p
    return float(e_k_2**t * e_k_inf ** (1.0 - t))


def _span_gaussian(ps: PointSet, samples: int, gen):
    basis = ps.span_basis()
    if basis.shape[0] == 0:
        return np.zeros((samples, ps.d))
    return gen.standard_normal((samples, basis.shape[0])) @ basis


def sudakov_rhs(points, rng, samples: int = 100_000) -> Estimate:
    """``E max_i |<G, x_i>|`` for G standard Gaussian on span{x_i}."""
    ps = _as_points(points)
    g = _span_gaussian(ps, int(samples), as_generator(rng))
    seed = rng if isinstance(rng, RngState) else None
    return mean_estimate(np.abs(g @ ps.points.T).max(axis=1), seed)


def gaussian_linf_on_span(points, rng, samples: int = 100_000) -> dict:
    """``E ||G||_inf`` for G standard Gaussian on span{x_i}, with its
    implied constant against ``sqrt(log m)`` (floored at log 2)."""
    ps = _as_points(points)
    g = _span_gaussian(ps, int(samples), as_generator(rng))
    est = mean_estimate(np.abs(g).max(axis=1), rng if isinstance(rng, RngState) else None)
    return {"estimate": est, "constant": est.value / math.sqrt(_floored_log(ps.m))}


def max_abs_gaussian_mean(m: int) -> float:
    """``E max_{i<=m} |g_i|`` for i.i.d. standard Gaussians, by quadrature of
    ``int_0^inf (1 - P(|g| <= t)^m) dt``."""
    val, _ = integrate.quad(lambda t: 1.0 - special.erf(t / math.sqrt(2.0)) ** m, 0.0, np.inf,
                            epsabs=0.0, epsrel=1e-12, limit=200)
    return float(val)
