"""Gromov-Wasserstein on tiny gauged spaces, cone costs, and Gromov-Hausdorff.

``gw_solve_tiny`` writes the GW objective as a quadratic form in the free
entries of the coupling (the top-left ``(n-1) x (m-1)`` block).  It scans a
grid over that block and then certifies the global minimum exactly by
enumerating active sets of the nonnegativity constraints: a quadratic over a
polytope attains its minimum at a stationary point of the restriction to
some face, and each face is one linear solve away.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import CostSpace, SegmentPath, VerifierConfig, ViolationReport, merge_reports, nncc_check
from .errors import DomainError, OptimalityError, PreconditionError
from .families import check_metric, random_sphere_point, sphere_distance
from .transport import Coupling, ThreePlan, check_coupling, glue

MAX_FREE_DIM = 4
GRID_RESOLUTION = 64
GH_MAX_POINTS = 5


# -- gauged spaces and the GW objective ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaugedSpace:
    """A finite set with a symmetric gauge matrix and probability weights."""

    gauge: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        f = np.atleast_2d(np.asarray(self.gauge, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if f.shape != (w.size, w.size):
            raise ValueError("gauge must be n x n with n = len(weights)")
        if np.max(np.abs(f - f.T), initial=0.0) > 1e-12:
            raise ValueError("gauge must be symmetric")
        if np.any(w < 0) or abs(float(w.sum()) - 1.0) > 1e-10:
            raise ValueError("weights must be a probability vector")
        object.__setattr__(self, "gauge", f)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.size

    @classmethod
    def uniform(cls, gauge) -> "GaugedSpace":
        g = np.atleast_2d(np.asarray(gauge, dtype=float))
        return cls(g, np.full(g.shape[0], 1.0 / g.shape[0]))

    @classmethod
    def from_dict(cls, d: dict) -> "GaugedSpace":
        return cls(np.asarray(d["gauge"], dtype=float), np.asarray(d["weights"], dtype=float))

    def to_dict(self) -> dict:
        return {"gauge": self.gauge, "weights": self.weights}


def gw_kernel(X: GaugedSpace, Y: GaugedSpace) -> np.ndarray:
    """K[(i,j),(k,l)] = (f_ik - g_jl)², so that GW cost = vec(π)ᵀ K vec(π)."""
    L = (X.gauge[:, None, :, None] - Y.gauge[None, :, None, :]) ** 2
    return L.reshape(X.n * Y.n, X.n * Y.n)


def gw_cost(pi, X: GaugedSpace, Y: GaugedSpace) -> float:
    """Σ (f_ii' - g_jj')² π_ij π_i'j' for a coupling of the two weight vectors."""
    P = np.asarray(pi.plan if isinstance(pi, Coupling) else pi, dtype=float)
    check_coupling(P, X.weights, Y.weights)
    v = P.ravel()
    return float(v @ gw_kernel(X, Y) @ v)


def _affine_parametrization(mu, nu):
    """π = b + A z over the free block z = π[:n-1, :m-1] (row-major)."""
    n, m = mu.size, nu.size
    d = (n - 1) * (m - 1)
    A = np.zeros((n, m, d))
    b = np.zeros((n, m))
    for i in range(n - 1):
        for j in range(m - 1):
            k = i * (m - 1) + j
            A[i, j, k] = 1.0
            A[i, m - 1, k] = -1.0
            A[n - 1, j, k] = -1.0
            A[n - 1, m - 1, k] = 1.0
    b[: n - 1, m - 1] = mu[: n - 1]
    b[n - 1, : m - 1] = nu[: m - 1]
    b[n - 1, m - 1] = mu[n - 1] - nu[: m - 1].sum()
    return A.reshape(n * m, d), b.ravel()


@dataclass(frozen=True, eq=False)
class GWResult:
    coupling: Coupling
    value: float
    certified: bool
    grid_value: float

    def __iter__(self):
        yield self.coupling
        yield self.value


def _grid_search(Q, q, q0, A, b, upper, resolution, chunk=200_000):
    axes = [np.linspace(0.0, u, resolution + 1) for u in upper]
    best_val, best_z = math.inf, None
    head, tail = axes[0], axes[1:]
    tail_pts = np.array(list(itertools.product(*tail))) if tail else np.zeros((1, 0))
    for z0 in head:
        Z = np.column_stack([np.full(len(tail_pts), z0), tail_pts])
        for start in range(0, len(Z), chunk):
            Zc = Z[start : start + chunk]
            feasible = np.all(Zc @ A.T + b >= -1e-15, axis=1)
            if not feasible.any():
                continue
            Zf = Zc[feasible]
            vals = np.einsum("ij,jk,ik->i", Zf, Q, Zf) + Zf @ q + q0
            k = int(np.argmin(vals))
            if vals[k] < best_val:
                best_val, best_z = float(vals[k]), Zf[k]
    return best_val, best_z


def _active_set_minimum(Q, q, q0, A, b, tol=1e-12):
    """Exact global minimum of zᵀQz + qᵀz + q0 subject to A z + b >= 0."""
    d = Q.shape[0]
    rows = A.shape[0]
    best_val, best_z = math.inf, None
    for k in range(d + 1):
        for active in itertools.combinations(range(rows), k):
            E = A[list(active)]
            # Stationarity on the face {E z = -b_active}: 2 Q z + q = Eᵀ λ.
            M = np.block([[2 * Q, -E.T], [E, np.zeros((k, k))]])
            rhs = np.concatenate([-q, -b[list(active)]])
            sol, *_ = np.linalg.lstsq(M, rhs, rcond=None)
            if np.max(np.abs(M @ sol - rhs), initial=0.0) > 1e-9:
                continue
            z = sol[:d]
            if np.any(A @ z + b < -tol):
                continue
            val = float(z @ Q @ z + q @ z + q0)
            if val < best_val:
                best_val, best_z = val, z
    return best_val, best_z


def gw_solve_tiny(X: GaugedSpace, Y: GaugedSpace, resolution: int | None = GRID_RESOLUTION) -> GWResult:
    """Global GW² minimum for ``(n_X - 1)(n_Y - 1) <= 4``.

    ``resolution`` sets the grid step ``1/resolution`` of the cross-check
    scan; ``None`` skips the scan and relies on the active-set certificate.
    """
    mu, nu = X.weights, Y.weights
    n, m = mu.size, nu.size
    d = (n - 1) * (m - 1)
    if d > MAX_FREE_DIM:
        raise PreconditionError(f"coupling polytope has dimension {d} > {MAX_FREE_DIM}")
    K = gw_kernel(X, Y)
    A, b = _affine_parametrization(mu, nu)
    if d == 0:
        P = b.reshape(n, m)
        val = float(b @ K @ b)
        return GWResult(Coupling(P, mu, nu), val, True, val)
    Q = A.T @ K @ A
    q = 2 * A.T @ K @ b
    q0 = float(b @ K @ b)
    upper = [min(mu[i], nu[j]) for i in range(n - 1) for j in range(m - 1)]
    val, z = _active_set_minimum(Q, q, q0, A, b)
    if resolution is None:
        grid_val, grid_z = val, z
    else:
        grid_val, grid_z = _grid_search(Q, q, q0, A, b, upper, resolution)
    certified = z is not None and val <= grid_val + 1e-12
    if not certified:
        val, z = grid_val, grid_z
    P = np.clip((A @ z + b).reshape(n, m), 0.0, None)
    return GWResult(Coupling(P, mu, nu), float(val), bool(certified), grid_val)


def gw_cost_space(resolution: int | None = GRID_RESOLUTION) -> CostSpace:
    return CostSpace(fn=lambda X, Y: gw_solve_tiny(X, Y, resolution).value, name="GW2", same_space=True)


def gw_segment(X0: GaugedSpace, X1: GaugedSpace, Y: GaugedSpace, gamma: ThreePlan, tol: float = 1e-8) -> SegmentPath:
    """X(s) on the γ-charged pairs of X0 x X1 with gauge (1-s) f0 + s f1.

    Raises :class:`OptimalityError` when either endpoint plan is not a
    certified GW optimum.
    """
    G = gamma.gamma
    if G.shape != (X0.n, X1.n, Y.n):
        raise ValueError("3-plan shape does not match the spaces")
    for X, pi in ((X0, gamma.pi0), (X1, gamma.pi1)):
        res = gw_solve_tiny(X, Y)
        gap = gw_cost(pi, X, Y) - res.value
        if not res.certified or gap > tol:
            raise OptimalityError(f"endpoint plan is not GW-optimal (gap {gap:.3g})", residual=gap)
    m01 = gamma.m01
    pairs = [(i, j) for i in range(X0.n) for j in range(X1.n) if m01[i, j] > 0]
    I = np.array([p[0] for p in pairs])
    J = np.array([p[1] for p in pairs])
    f0 = X0.gauge[np.ix_(I, I)]
    f1 = X1.gauge[np.ix_(J, J)]
    w = np.array([m01[p] for p in pairs])
    w = w / w.sum()

    def path(s):
        return GaugedSpace((1 - s) * f0 + s * f1, w)

    return SegmentPath(Y, X0, X1, path, name="gw", info={"pairs": pairs})


def random_gauged_space(rng: np.random.Generator, n: int, scale: float = 2.0, metric: bool = False) -> GaugedSpace:
    """Symmetric gauge with zero diagonal; Dirichlet weights."""
    if metric:
        pts = rng.uniform(-scale, scale, size=(n, 2))
        f = np.linalg.norm(pts[:, None] - pts[None], axis=-1)
    else:
        f = rng.uniform(0, scale, size=(n, n))
        f = np.triu(f, 1)
        f = f + f.T
    w = rng.dirichlet(np.ones(n)) if n > 1 else np.ones(1)
    return GaugedSpace(f, w)


def gw_nncc_check(
    X0: GaugedSpace,
    X1: GaugedSpace,
    Y: GaugedSpace,
    cfg: VerifierConfig,
    n_test_points: int = 2,
    resolution: int | None = None,
) -> ViolationReport:
    """NNCC check of the GW segment against sampled small test spaces.

    The test spaces are ``cfg.n_y`` random spaces with ``n_test_points``
    points plus ``X0``, ``X1`` when they fit the solver's size guard.  A run
    with an uncertified solve is marked inconclusive instead of failed.
    Endpoint plans are always cross-checked on the grid; the many solves
    along the segment use the exact active-set certificate unless
    ``resolution`` is given.
    """
    pi0 = gw_solve_tiny(X0, Y)
    pi1 = gw_solve_tiny(X1, Y)
    if not (pi0.certified and pi1.certified):
        return ViolationReport("nncc", False, math.nan, cfg.tol, None, 0, cfg.seed, inconclusive=True)
    seg = gw_segment(X0, X1, Y, glue(pi0.coupling, pi1.coupling))
    rng = np.random.default_rng(cfg.seed)
    ys: list = [random_gauged_space(rng, n_test_points) for _ in range(cfg.n_y)]
    n_mid = len(seg.info["pairs"])
    for X in (X0, X1):
        if (n_mid - 1) * (X.n - 1) <= MAX_FREE_DIM:
            ys.append(X)
    ys.extend(cfg.extra_y)
    certified = [True]

    def fn(A, B):
        res = gw_solve_tiny(A, B, resolution)
        certified[0] &= res.certified
        return res.value

    cost = CostSpace(fn=fn, name="GW2")
    report = nncc_check(seg, cost, cfg, ys=ys)
    if not certified[0] and not report.passed:
        report = replace(report, inconclusive=True)
    return report


# -- entropies and cone costs -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EntropySpec:
    """Convex entropy F on [0, inf) with recession slope F'(inf).

    ``dF`` is the derivative (None for piecewise-linear F, in which case
    ``kinks`` lists the break points).
    """

    name: str
    F: Callable[[float], float]
    recession: float
    dF: Callable[[float], float] | None = None
    d2F: Callable[[float], float] | None = None
    kinks: tuple = ()

    def __post_init__(self):
        t = np.concatenate([np.linspace(0.0, 4.0, 81), np.geomspace(4.5, 1e4, 40)])
        vals = np.array([self.F(v) for v in t])
        # Second divided differences on a nonuniform grid.
        d1 = np.diff(vals) / np.diff(t)
        if np.any(np.diff(d1) < -1e-9 * (1 + np.abs(d1[:-1]))):
            raise DomainError(f"entropy {self.name!r} is not convex")


def _kl_F(t: float) -> float:
    return 1.0 if t == 0 else t * math.log(t) - t + 1.0


KL = EntropySpec("kl", _kl_F, math.inf, dF=lambda t: math.log(t), d2F=lambda t: 1.0 / t)
TV = EntropySpec("tv", lambda t: abs(t - 1.0), 1.0, kinks=(1.0,))
ENTROPIES = {"kl": KL, "tv": TV}


def _perspective(F: EntropySpec, r: float, z: float) -> float:
    """r F(z / r) with the recession convention z F'(inf) at r = 0."""
    if r > 0:
        return r * F.F(z / r)
    if z == 0:
        return 0.0
    return z * F.recession


def _golden(phi, lo, hi, iters=200):
    g = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = phi(c), phi(d)
    for _ in range(iters):
        if b - a < 1e-13 * (1 + abs(a)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = phi(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = phi(d)
    return 0.5 * (a + b)


def cone_cost(F0: EntropySpec | str, F1: EntropySpec | str, base_c: float, r: float, s: float) -> float:
    """inf over z >= 0 of r F0(z/r) + s F1(z/s) + base_c z."""
    F0 = ENTROPIES[F0] if isinstance(F0, str) else F0
    F1 = ENTROPIES[F1] if isinstance(F1, str) else F1
    if r < 0 or s < 0:
        raise ValueError("radii must be nonnegative")

    def phi(z):
        if base_c == math.inf:
            return math.inf if z > 0 else _perspective(F0, r, 0.0) + _perspective(F1, s, 0.0)
        return _perspective(F0, r, z) + _perspective(F1, s, z) + base_c * z

    at_zero = phi(0.0)
    if base_c == math.inf:
        return at_zero
    slope_inf = F0.recession + F1.recession + base_c
    if slope_inf < 0:
        return -math.inf
    candidates = [at_zero]
    if F0.dF is None and F1.dF is None:
        candidates += [phi(r * k) for k in F0.kinks] + [phi(s * k) for k in F1.kinks]
        return min(candidates)
    scale = max(r, s, 1e-300)
    lo, hi = math.log(scale) - 60.0, math.log(scale) + 60.0
    u = _golden(lambda v: phi(math.exp(v)), lo, hi)
    z = math.exp(u)
    if F0.dF is not None and F1.dF is not None and r > 0 and s > 0:
        # Newton polish on phi'(z) = F0'(z/r) + F1'(z/s) + c in log coordinates.
        for _ in range(20):
            g = F0.dF(z / r) + F1.dF(z / s) + base_c
            h = z * (F0.d2F(z / r) / r + F1.d2F(z / s) / s)
            step = g / h
            u -= step
            z = math.exp(u)
            if abs(step) < 1e-15:
                break
    candidates.append(phi(z))
    return min(candidates)


def wfr_base_cost(d: float) -> float:
    """-log cos²(min(d, π)); +inf at d = π/2."""
    c = math.cos(min(d, math.pi))
    return math.inf if c == 0.0 else -math.log(c * c)


def wfr_cone_cost(d: float, r: float, s: float) -> float:
    """r + s - 2 sqrt(rs) cos(min(d, π))."""
    if r < 0 or s < 0:
        raise ValueError("radii must be nonnegative")
    return r + s - 2.0 * math.sqrt(r * s) * math.cos(min(d, math.pi))


@dataclass(frozen=True, eq=False)
class ConePoint:
    """Point (x, r) of the cone over a base space; r = 0 is the apex."""

    base: np.ndarray
    radius: float

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("cone radius must be nonnegative")
        object.__setattr__(self, "base", np.asarray(self.base, dtype=float))
        object.__setattr__(self, "radius", float(self.radius))

    def __eq__(self, other):
        if not isinstance(other, ConePoint):
            return NotImplemented
        if self.radius == 0.0 and other.radius == 0.0:
            return True
        return self.radius == other.radius and np.array_equal(self.base, other.base)

    __hash__ = None

    def embed(self) -> np.ndarray:
        """sqrt(r) x in R^{n+1}."""
        return math.sqrt(self.radius) * self.base

    @classmethod
    def from_embedding(cls, z, apex_base) -> "ConePoint":
        z = np.asarray(z, dtype=float)
        nz = float(np.linalg.norm(z))
        if nz == 0.0:
            return cls(apex_base, 0.0)
        return cls(z / nz, nz * nz)

    def to_dict(self) -> dict:
        return {"base": self.base, "radius": self.radius}


def sphere_cone_cost(p: ConePoint, q: ConePoint) -> float:
    if p.radius == 0.0 or q.radius == 0.0:
        return p.radius + q.radius
    return wfr_cone_cost(sphere_distance(p.base, q.base), p.radius, q.radius)


def _random_cone_point(rng, n, r_max):
    return ConePoint(random_sphere_point(rng, n), rng.uniform(0.0, r_max))


def cone_segment(p0: ConePoint, p1: ConePoint, ybar: ConePoint) -> SegmentPath:
    """Straight line between the embeddings, mapped back to the cone."""
    z0, z1 = p0.embed(), p1.embed()
    apex = p0.base

    def path(s):
        return ConePoint.from_embedding((1 - s) * z0 + s * z1, apex)

    return SegmentPath(ybar, p0, p1, path, name="cone")


def cone_nncc_check(base: str, cfg: VerifierConfig, n_triples: int = 20, n: int = 2, r_max: float = 4.0) -> ViolationReport:
    """NNCC check of the WFR cone over S^n through its Euclidean embedding."""
    if base != "sphere":
        raise PreconditionError(f"cone base {base!r} is not implemented; only 'sphere' is")
    rng = np.random.default_rng(cfg.seed)
    cost = CostSpace(
        fn=sphere_cone_cost,
        name="wfr-cone",
        sampler=lambda g, k: [_random_cone_point(g, n + 1, r_max) for _ in range(k)],
    )
    reports = []
    for t in range(n_triples):
        p0, p1, yb = (_random_cone_point(rng, n + 1, r_max) for _ in range(3))
        reports.append(nncc_check(cone_segment(p0, p1, yb), cost, cfg.replace(seed=cfg.seed + t)))
    return merge_reports(reports)


# -- Gromov-Hausdorff ---------------------------------------------------------------------------


def gh_distance(DX, DY) -> float:
    """inf over correspondences R of sup |d_X(x,x') - d_Y(y,y')| (no factor 1/2).

    Every correspondence contains the union of a graph of some f: X -> Y and
    the transposed graph of some g: Y -> X, which is itself a
    correspondence, and distortion only grows with R.  The search is a
    branch and bound over (f, g).
    """
    DX = check_metric(DX)
    DY = check_metric(DY)
    n, m = DX.shape[0], DY.shape[0]
    if n > GH_MAX_POINTS or m > GH_MAX_POINTS:
        raise PreconditionError(f"gh_distance supports at most {GH_MAX_POINTS} points per space")
    if n == 0 or m == 0:
        raise ValueError("metric spaces must be nonempty")
    slots = [("x", i) for i in range(n)] + [("y", j) for j in range(m)]
    best = [math.inf]
    pairs: list[tuple[int, int]] = []

    def search(k, cur):
        if cur >= best[0]:
            return
        if k == len(slots):
            best[0] = cur
            return
        kind, a = slots[k]
        options = [(a, b) for b in range(m)] if kind == "x" else [(b, a) for b in range(n)]
        scored = []
        for p in options:
            dist = cur
            for q in pairs:
                dist = max(dist, abs(DX[p[0], q[0]] - DY[p[1], q[1]]))
            scored.append((dist, p))
        scored.sort(key=lambda t: t[0])
        for dist, p in scored:
            pairs.append(p)
            search(k + 1, dist)
            pairs.pop()

    search(0, 0.0)
    return best[0]
