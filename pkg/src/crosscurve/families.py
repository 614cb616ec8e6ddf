"""Closed-form cost families with their variational c-segments.

Each constructor returns a :class:`Family`: the cost as a
:class:`~crosscurve.core.CostSpace`, a segment builder ``(x0, x1, ybar) ->
SegmentPath`` and a point sampler for random triples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np

from .core import CostSpace, SegmentPath, product_cost, product_segment, submersion_project
from .errors import CutLocusError, DomainError, PreconditionError, SolverError
from .mtw import SmoothCost, c_segment_solve

ANTIPODAL_MARGIN = 1e-6


@dataclass(frozen=True, eq=False)
class Family:
    """A cost space with a segment builder and samplers.

    ``sample_x(rng)`` draws a point of X (used for x0, x1) and
    ``sample_base(rng)`` a point of Y (used for ybar); the cost's own sampler
    draws the test points y.
    """

    name: str
    cost: CostSpace
    segment: Callable[[Any, Any, Any], SegmentPath]
    sample_x: Callable[[np.random.Generator], Any]
    sample_base: Callable[[np.random.Generator], Any]
    params: dict = field(default_factory=dict)
    smooth: SmoothCost | None = None

    def random_triple(self, rng: np.random.Generator):
        return self.sample_x(rng), self.sample_x(rng), self.sample_base(rng)

    def random_segment(self, rng: np.random.Generator) -> SegmentPath:
        return self.segment(*self.random_triple(rng))


def _linear_path(x0, x1):
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    return lambda s: (1.0 - s) * x0 + s * x1


def linear_segment(x0, x1, ybar) -> SegmentPath:
    return SegmentPath(ybar, x0, x1, _linear_path(x0, x1), name="linear")


def _box_sampler(dim: int, lo: float, hi: float):
    def sampler(rng, n):
        return list(rng.uniform(lo, hi, size=(n, dim)))

    return sampler


def _sq_dist_batch(xs, ys):
    X = np.asarray(xs, dtype=float)
    Y = np.asarray(ys, dtype=float)
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


# -- Hilbert --------------------------------------------------------------------


def hilbert_family(dim: int, F=None, F_inv=None, G=None, box=(-2.0, 2.0)) -> Family:
    """c(x, y) = ‖F(x) - G(y)‖² with segment F(x(s)) = (1-s)F(x0) + sF(x1).

    Without maps this is the squared Euclidean distance with straight lines.
    ``F`` needs an inverse ``F_inv`` on its (convex) image.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    lo, hi = box
    if F is None and G is None:
        cost = CostSpace(
            fn=lambda x, y: float(np.sum((np.asarray(x) - np.asarray(y)) ** 2)),
            name="hilbert",
            dim_x=dim,
            dim_y=dim,
            sampler=_box_sampler(dim, lo, hi),
            batch=_sq_dist_batch,
        )
        segment = linear_segment
    else:
        if F is None or F_inv is None or G is None:
            raise ValueError("the generalized form needs F, F_inv and G")
        Gm = G

        def fn(x, y):
            return float(np.sum((F(np.asarray(x)) - Gm(np.asarray(y))) ** 2))

        def batch(xs, ys):
            return _sq_dist_batch([F(np.asarray(x)) for x in xs], [Gm(np.asarray(y)) for y in ys])

        cost = CostSpace(fn=fn, name="hilbert-FG", dim_x=dim, dim_y=dim, sampler=_box_sampler(dim, lo, hi), batch=batch, same_space=False)

        def segment(x0, x1, ybar):
            f0, f1 = F(np.asarray(x0)), F(np.asarray(x1))
            return SegmentPath(ybar, x0, x1, lambda s: F_inv((1 - s) * f0 + s * f1), name="F-linear")

    return Family(
        name="hilbert",
        cost=cost,
        segment=segment,
        sample_x=lambda rng: rng.uniform(lo, hi, size=dim),
        sample_base=lambda rng: rng.uniform(lo, hi, size=dim),
        params={"dim": dim},
    )


# -- Bregman --------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Potential:
    """A strictly convex potential u with gradient, Hessian and domain sampler.

    ``grad_inv`` is an optional closed-form inverse of ``grad``.
    """

    name: str
    u: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    sample: Callable[[np.random.Generator, int], np.ndarray]
    in_domain: Callable[[np.ndarray], bool] = lambda x: True
    grad_inv: Callable[[np.ndarray], np.ndarray] | None = None


def quadratic_potential() -> Potential:
    return Potential(
        name="quadratic",
        u=lambda x: float(x @ x),
        grad=lambda x: 2.0 * x,
        hess=lambda x: 2.0 * np.eye(len(x)),
        sample=lambda rng, d: rng.uniform(-2.0, 2.0, size=d),
        grad_inv=lambda g: 0.5 * g,
    )


def entropy_potential() -> Potential:
    """u(x) = Σ x_i log x_i on the positive orthant."""
    return Potential(
        name="entropy",
        u=lambda x: float(np.sum(x * np.log(x))),
        grad=lambda x: np.log(x) + 1.0,
        hess=lambda x: np.diag(1.0 / x),
        sample=lambda rng, d: rng.uniform(0.1, 3.0, size=d),
        in_domain=lambda x: bool(np.all(x > 0)),
        grad_inv=lambda g: np.exp(g - 1.0),
    )


def quartic_potential() -> Potential:
    """u(x) = ‖x‖⁴."""
    return Potential(
        name="quartic",
        u=lambda x: float((x @ x) ** 2),
        grad=lambda x: 4.0 * (x @ x) * x,
        hess=lambda x: 4.0 * (x @ x) * np.eye(len(x)) + 8.0 * np.outer(x, x),
        sample=lambda rng, d: rng.uniform(-2.0, 2.0, size=d),
    )


POTENTIALS = {"quadratic": quadratic_potential, "entropy": entropy_potential, "quartic": quartic_potential}


def invert_gradient(pot: Potential, target: np.ndarray, x_start: np.ndarray, tol: float = 1e-12, max_iter: int = 50):
    """Solve ∇u(x) = target by damped Newton with backtracking."""
    if pot.grad_inv is not None:
        return pot.grad_inv(target)
    x = np.array(x_start, dtype=float)
    scale = 1.0 + float(np.max(np.abs(target)))
    r = pot.grad(x) - target
    for _ in range(max_iter):
        nr = float(np.linalg.norm(r))
        if nr <= tol * scale:
            return x
        dx = np.linalg.solve(pot.hess(x), -r)
        step = 1.0
        while step > 1e-12:
            trial = x + step * dx
            if pot.in_domain(trial):
                rt = pot.grad(trial) - target
                if np.linalg.norm(rt) < nr:
                    x, r = trial, rt
                    break
            step *= 0.5
        else:
            break
    if float(np.linalg.norm(r)) <= tol * scale:
        return x
    raise SolverError(f"gradient inversion for {pot.name} did not converge (residual {np.linalg.norm(r):.3g})")


def bregman_family(dim: int, potential: Potential | str = "entropy", mode: str = "forward") -> Family:
    """Bregman divergence of ``potential``.

    forward: c(x, y) = u(x) - u(y) - <∇u(y), x - y>, straight segments.
    reverse: c(x, y) = u(y) - u(x) - <∇u(x), y - x>, segments straight in ∇u.
    """
    pot = POTENTIALS[potential]() if isinstance(potential, str) else potential
    if mode not in ("forward", "reverse"):
        raise ValueError("mode must be 'forward' or 'reverse'")

    def div(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if not (pot.in_domain(p) and pot.in_domain(q)):
            raise DomainError(f"point outside the domain of {pot.name}")
        return pot.u(p) - pot.u(q) - float(pot.grad(q) @ (p - q))

    if mode == "forward":
        fn = div
        segment = linear_segment
    else:

        def fn(x, y):
            return div(y, x)

        def segment(x0, x1, ybar):
            g0 = pot.grad(np.asarray(x0, dtype=float))
            g1 = pot.grad(np.asarray(x1, dtype=float))
            start = _linear_path(x0, x1)

            def path(s):
                return invert_gradient(pot, (1 - s) * g0 + s * g1, start(s))

            return SegmentPath(ybar, x0, x1, path, name=f"reverse {pot.name}")

    cost = CostSpace(
        fn=fn,
        name=f"bregman-{pot.name}-{mode}",
        dim_x=dim,
        dim_y=dim,
        sampler=lambda rng, n: [pot.sample(rng, dim) for _ in range(n)],
    )
    return Family(
        name="bregman",
        cost=cost,
        segment=segment,
        sample_x=lambda rng: pot.sample(rng, dim),
        sample_base=lambda rng: pot.sample(rng, dim),
        params={"dim": dim, "potential": pot.name, "mode": mode},
    )


def reverse_bregman_residual(pot: Potential, seg: SegmentPath, s: float) -> float:
    """‖∇u(x(s)) - [(1-s)∇u(x0) + s∇u(x1)]‖."""
    target = (1 - s) * pot.grad(np.asarray(seg.x0)) + s * pot.grad(np.asarray(seg.x1))
    return float(np.linalg.norm(pot.grad(np.asarray(seg.at(s))) - target))


# -- semi-geostrophic ---------------------------------------------------------------


def semi_geostrophic_family(dim: int, g: float = 1.0) -> Family:
    """Points (x, a) in R^dim x (0, ∞) stored as vectors of length dim + 1.

    c((x, a), (y, b)) = ‖x - y‖²/(2b) + g a / b.
    """
    if g == 0:
        raise ValueError("g must be nonzero")

    def fn(p, q):
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        b = q[-1]
        if not b > 0:
            raise DomainError("semi-geostrophic cost needs b > 0")
        return float(np.sum((p[:-1] - q[:-1]) ** 2) / (2 * b) + g * p[-1] / b)

    def batch(ps, qs):
        P = np.asarray(ps, dtype=float)
        Q = np.asarray(qs, dtype=float)
        if not np.all(Q[:, -1] > 0):
            raise DomainError("semi-geostrophic cost needs b > 0")
        sq = _sq_dist_batch(P[:, :-1], Q[:, :-1])
        return sq / (2 * Q[None, :, -1]) + g * P[:, -1:] / Q[None, :, -1]

    def sample(rng):
        return np.concatenate([rng.uniform(-2.0, 2.0, size=dim), rng.uniform(0.5, 2.0, size=1)])

    def segment(p0, p1, ybar):
        p0 = np.asarray(p0, dtype=float)
        p1 = np.asarray(p1, dtype=float)
        x0, a0, x1, a1 = p0[:-1], p0[-1], p1[:-1], p1[-1]
        bump = float(np.sum((x0 - x1) ** 2)) / (2 * g)

        def path(s):
            a = (1 - s) * a0 + s * a1 + s * (1 - s) * bump
            if not a > 0:
                raise DomainError(f"semi-geostrophic segment leaves a > 0 at s = {s}")
            return np.concatenate([(1 - s) * x0 + s * x1, [a]])

        return SegmentPath(ybar, p0, p1, path, name="semi-geostrophic")

    cost = CostSpace(fn=fn, name="semi-geostrophic", dim_x=dim + 1, dim_y=dim + 1, sampler=lambda rng, n: [sample(rng) for _ in range(n)], batch=batch)
    return Family("semi_geostrophic", cost, segment, sample, sample, {"dim": dim, "g": g})


# -- Monge ----------------------------------------------------------------------------


def check_metric(D, tol: float = 1e-12) -> np.ndarray:
    """Validate a finite metric matrix (symmetry, zero diagonal, triangle inequality)."""
    D = np.asarray(D, dtype=float)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("metric must be a square matrix")
    if np.any(np.abs(D - D.T) > tol) or np.any(np.abs(np.diag(D)) > tol) or np.any(D < -tol):
        raise PreconditionError("metric must be symmetric, nonnegative, zero on the diagonal")
    viol = D[:, None, :] - (D[:, :, None] + D[None, :, :])
    if np.max(viol) > tol:
        raise PreconditionError("metric violates the triangle inequality")
    return D


def monge_segment(x0, x1, ybar) -> SegmentPath:
    """x(0) = x0, x(s) = ybar on (0, 1), x(1) = x1."""
    return SegmentPath(ybar, x0, x1, lambda s: ybar, name="monge")


def monge_family(metric=None, dim: int = 2, box=(-2.0, 2.0)) -> Family:
    """c(x, y) = d(x, y) for a finite metric matrix (points are indices) or Euclidean R^dim."""
    if metric is None:
        lo, hi = box

        def batch(xs, ys):
            return np.sqrt(_sq_dist_batch(xs, ys))

        cost = CostSpace(
            fn=lambda x, y: float(np.linalg.norm(np.asarray(x) - np.asarray(y))),
            name="monge-euclidean",
            dim_x=dim,
            dim_y=dim,
            sampler=_box_sampler(dim, lo, hi),
            batch=batch,
        )
        sample = lambda rng: rng.uniform(lo, hi, size=dim)  # noqa: E731
        params = {"dim": dim}
    else:
        D = check_metric(metric)
        n = D.shape[0]

        def batch(xs, ys):
            return D[np.ix_(np.asarray(xs, dtype=int), np.asarray(ys, dtype=int))]

        cost = CostSpace(
            fn=lambda x, y: float(D[int(x), int(y)]),
            name="monge-finite",
            sampler=lambda rng, k: [int(v) for v in rng.integers(0, n, size=k)],
            batch=batch,
        )
        sample = lambda rng: int(rng.integers(0, n))  # noqa: E731
        params = {"n": n}
    return Family("monge", cost, monge_segment, sample, sample, params)


def random_finite_metric(n: int, rng: np.random.Generator, kind: str | None = None) -> np.ndarray:
    """Random metric on n points: Euclidean, shortest-path, or an ultrametric-like one."""
    kind = kind or ("euclid", "graph", "ultra")[int(rng.integers(3))]
    if kind == "euclid":
        P = rng.uniform(-1, 1, size=(n, 2))
        D = np.sqrt(_sq_dist_batch(P, P))
    elif kind == "graph":
        W = rng.uniform(0.1, 2.0, size=(n, n))
        W = np.minimum(W, W.T)
        np.fill_diagonal(W, 0.0)
        D = W.copy()
        for k in range(n):
            D = np.minimum(D, D[:, k : k + 1] + D[k : k + 1, :])
    else:
        h = rng.uniform(0, 1, size=n)
        D = np.maximum(h[:, None], h[None, :])
        np.fill_diagonal(D, 0.0)
    D = 0.5 * (D + D.T)
    np.fill_diagonal(D, 0.0)
    return D


# -- soft-threshold -------------------------------------------------------------------


def soft_threshold_cost_value(z, eps: float) -> float:
    r = float(np.linalg.norm(z))
    return r * r / (2 * eps) if r <= eps else r - eps / 2


def shrink_split(z, eps: float):
    """Optimal split z = a + b for min ‖a‖ + ‖b‖²/(2ε): b is z clipped to the ε-ball."""
    z = np.asarray(z, dtype=float)
    r = float(np.linalg.norm(z))
    b = z.copy() if r <= eps else z * (eps / r)
    return z - b, b


def soft_threshold_family(dim: int, eps: float, box=(-2.0, 2.0)) -> Family:
    """Infimal convolution of ‖·‖ and ‖·‖²/(2ε), with segments projected from the product."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    lo, hi = box

    def batch(xs, ys):
        r = np.sqrt(_sq_dist_batch(xs, ys))
        return np.where(r <= eps, r * r / (2 * eps), r - eps / 2)

    cost = CostSpace(
        fn=lambda x, y: soft_threshold_cost_value(np.asarray(x) - np.asarray(y), eps),
        name="soft-threshold",
        dim_x=dim,
        dim_y=dim,
        sampler=_box_sampler(dim, lo, hi),
        batch=batch,
    )
    monge = monge_family(dim=dim, box=box).cost
    scaled = CostSpace(
        fn=lambda x, y: float(np.sum((np.asarray(x) - np.asarray(y)) ** 2)) / (2 * eps),
        name="hilbert/2eps",
        dim_x=dim,
        dim_y=dim,
        sampler=_box_sampler(dim, lo, hi),
        batch=lambda xs, ys: _sq_dist_batch(xs, ys) / (2 * eps),
    )
    total = product_cost(monge, scaled)

    def fiber_sum(p):
        return np.asarray(p[0], dtype=float) + np.asarray(p[1], dtype=float)

    def segment(x0, x1, ybar):
        ybar = np.asarray(ybar, dtype=float)
        zero = np.zeros(dim)
        lifts = []
        for x in (x0, x1):
            a, b = shrink_split(np.asarray(x, dtype=float) - ybar, eps)
            lifts.append((ybar + a, b))
        up = product_segment(monge_segment(lifts[0][0], lifts[1][0], ybar), linear_segment(lifts[0][1], lifts[1][1], zero))
        seg = submersion_project(up, fiber_sum, fiber_sum, total, cost)
        return SegmentPath(ybar, x0, x1, seg.path, name="soft-threshold")

    sample = lambda rng: rng.uniform(lo, hi, size=dim)  # noqa: E731
    return Family("soft_threshold", cost, segment, sample, sample, {"dim": dim, "eps": eps, "product_cost": total})


# -- sphere -----------------------------------------------------------------------------


def sphere_distance(x, y) -> float:
    """Geodesic distance on the unit sphere, accurate near 0 and near π."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return 2.0 * math.atan2(float(np.linalg.norm(x - y)), float(np.linalg.norm(x + y)))


def _sphere_batch(xs, ys):
    X = np.asarray(xs, dtype=float)
    Y = np.asarray(ys, dtype=float)
    minus = np.sqrt(_sq_dist_batch(X, Y))
    plus = np.sqrt(_sq_dist_batch(X, -Y))
    return (2.0 * np.arctan2(minus, plus)) ** 2


def sphere_log(base, x) -> np.ndarray:
    """Tangent vector at ``base`` pointing to ``x`` with length d(base, x)."""
    base = np.asarray(base, dtype=float)
    x = np.asarray(x, dtype=float)
    d = sphere_distance(base, x)
    if d > math.pi - ANTIPODAL_MARGIN:
        raise CutLocusError(f"point is within {ANTIPODAL_MARGIN} of the antipode (d = {d})")
    w = x - (x @ base) * base
    nw = float(np.linalg.norm(w))
    if nw == 0.0 or d == 0.0:
        return np.zeros_like(base)
    return (d / nw) * w


def sphere_exp(base, v) -> np.ndarray:
    base = np.asarray(base, dtype=float)
    v = np.asarray(v, dtype=float)
    t = float(np.linalg.norm(v))
    if t == 0.0:
        return base.copy()
    out = math.cos(t) * base + (math.sin(t) / t) * v
    return out / np.linalg.norm(out)


def random_sphere_point(rng: np.random.Generator, n: int) -> np.ndarray:
    v = rng.standard_normal(n + 1)
    return v / np.linalg.norm(v)


def sphere_segment(x0, x1, ybar) -> SegmentPath:
    """x(s) = exp_ybar((1-s) log_ybar x0 + s log_ybar x1)."""
    v0 = sphere_log(ybar, x0)
    v1 = sphere_log(ybar, x1)
    return SegmentPath(ybar, x0, x1, lambda s: sphere_exp(ybar, (1 - s) * v0 + s * v1), name="sphere exp/log")


def sphere_geodesic(x0, x1) -> SegmentPath:
    """Constant-speed minor arc from x0 to x1 (base point x0)."""
    v = sphere_log(x0, x1)
    return SegmentPath(x0, x0, x1, lambda s: sphere_exp(x0, s * v), name="great circle")


def angles_to_point(u) -> np.ndarray:
    th, ph = float(u[0]), float(u[1])
    return np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])


def point_to_angles(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.array([math.acos(max(-1.0, min(1.0, x[2]))), math.atan2(x[1], x[0])])


def sphere_angle_cost(cut_margin: float = 0.05, pole_margin: float = 0.05) -> SmoothCost:
    """d² on S² in spherical angles (θ, φ), smooth away from poles and cut locus."""

    def fn(u, v):
        return sphere_distance(angles_to_point(u), angles_to_point(v)) ** 2

    def domain(u, v):
        ok_poles = pole_margin < u[0] < math.pi - pole_margin and pole_margin < v[0] < math.pi - pole_margin
        return ok_poles and sphere_distance(angles_to_point(u), angles_to_point(v)) < math.pi - cut_margin

    return SmoothCost(fn=fn, dim=2, domain=domain, name="sphere-angles")


def sphere_family(n: int = 2) -> Family:
    """Squared geodesic distance on the unit sphere S^n in R^(n+1)."""
    if n < 1:
        raise ValueError("n must be at least 1")

    def fn(x, y):
        return sphere_distance(x, y) ** 2

    cost = CostSpace(
        fn=fn,
        name=f"sphere-S{n}",
        dim_x=n + 1,
        dim_y=n + 1,
        sampler=lambda rng, k: [random_sphere_point(rng, n) for _ in range(k)],
        batch=_sphere_batch,
    )
    sample = lambda rng: random_sphere_point(rng, n)  # noqa: E731
    return Family("sphere", cost, sphere_segment, sample, sample, {"n": n}, smooth=sphere_angle_cost() if n == 2 else None)


# -- log-distance -----------------------------------------------------------------------


def log_distance_smooth(dim: int = 2, min_sep: float = 1e-6) -> SmoothCost:
    def fn(x, y):
        return -math.log(float(np.linalg.norm(x - y)))

    def domain(x, y):
        return float(np.linalg.norm(x - y)) > min_sep

    return SmoothCost(fn=fn, dim=dim, domain=domain, name="log-distance")


def log_distance_family(dim: int = 2, box=(-2.0, 2.0)) -> Family:
    """c(x, y) = -log|x - y| on {x ≠ y}; segments solve the c-segment equation."""
    lo, hi = box
    smooth = log_distance_smooth(dim)

    def fn(x, y):
        r = float(np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float)))
        if r == 0.0:
            raise DomainError("log-distance cost is not defined at x = y")
        return -math.log(r)

    def batch(xs, ys):
        r2 = _sq_dist_batch(xs, ys)
        if np.any(r2 == 0.0):
            raise DomainError("log-distance cost is not defined at x = y")
        return -0.5 * np.log(r2)

    cost = CostSpace(fn=fn, name="log-distance", dim_x=dim, dim_y=dim, sampler=_box_sampler(dim, lo, hi), batch=batch, same_space=False)

    def segment(x0, x1, ybar):
        return c_segment_solve(smooth, x0, x1, ybar)

    def sample_x(rng):
        return rng.uniform(lo, hi, size=dim)

    return Family("log_distance", cost, segment, sample_x, sample_x, {"dim": dim}, smooth=smooth)


# -- negative controls --------------------------------------------------------------------


def quartic_family(weights=(1.0, 2.0), box=(-2.0, 2.0)) -> Family:
    """Anisotropic quartic c(x, y) = Σ w_i (x_i - y_i)⁴ with straight segments.

    Straight lines are not variational c-segments for this cost, so it
    serves as a negative control for the verifiers.
    """
    w = np.asarray(weights, dtype=float)
    dim = len(w)
    lo, hi = box

    def batch(xs, ys):
        diff = np.asarray(xs, dtype=float)[:, None, :] - np.asarray(ys, dtype=float)[None, :, :]
        return np.einsum("ijk,k->ij", diff**4, w)

    cost = CostSpace(
        fn=lambda x, y: float(np.sum(w * (np.asarray(x) - np.asarray(y)) ** 4)),
        name="quartic",
        dim_x=dim,
        dim_y=dim,
        sampler=_box_sampler(dim, lo, hi),
        batch=batch,
    )
    smooth = SmoothCost(fn=lambda x, y: float(np.sum(w * (x - y) ** 4)), dim=dim, name="quartic")
    sample = lambda rng: rng.uniform(lo, hi, size=dim)  # noqa: E731
    return Family("quartic", cost, linear_segment, sample, sample, {"weights": list(w)}, smooth=smooth)


def norm4_smooth(dim: int = 2) -> SmoothCost:
    """c(x, y) = ‖x - y‖⁴, the scan fixture."""
    return SmoothCost(fn=lambda x, y: float(np.sum((x - y) ** 2) ** 2), dim=dim, name="norm4")


# Poincaré disk ------------------------------------------------------------------------------


def poincare_distance(p, q) -> float:
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    num = 2.0 * float(np.sum((p - q) ** 2))
    den = (1.0 - float(p @ p)) * (1.0 - float(q @ q))
    return math.acosh(1.0 + num / den)


def _to_hyperboloid(p):
    p = np.asarray(p, dtype=float)
    r2 = float(p @ p)
    return np.concatenate([[1 + r2], 2 * p]) / (1 - r2)


def _from_hyperboloid(h):
    return h[1:] / (1.0 + h[0])


def poincare_geodesic(p0, p1) -> SegmentPath:
    """Constant-speed hyperbolic geodesic, computed on the hyperboloid."""
    h0, h1 = _to_hyperboloid(p0), _to_hyperboloid(p1)
    D = poincare_distance(p0, p1)
    if D == 0.0:
        return SegmentPath(p0, p0, p1, lambda s: np.asarray(p0, dtype=float), name="hyperbolic geodesic")
    direction = (h1 - math.cosh(D) * h0) / math.sinh(D)

    def path(s):
        return _from_hyperboloid(math.cosh(s * D) * h0 + math.sinh(s * D) * direction)

    return SegmentPath(p0, p0, p1, path, name="hyperbolic geodesic")


def hyperbolic_family(max_radius: float = 0.8) -> Family:
    """Squared hyperbolic distance on the Poincaré disk; geodesics as segments."""

    def sample(rng):
        r = max_radius * math.sqrt(rng.uniform())
        t = rng.uniform(0, 2 * math.pi)
        return np.array([r * math.cos(t), r * math.sin(t)])

    cost = CostSpace(
        fn=lambda p, q: poincare_distance(p, q) ** 2,
        name="hyperbolic",
        dim_x=2,
        dim_y=2,
        sampler=lambda rng, n: [sample(rng) for _ in range(n)],
    )

    def segment(x0, x1, ybar):
        g = poincare_geodesic(x0, x1)
        return SegmentPath(ybar, x0, x1, g.path, name="hyperbolic geodesic")

    return Family("hyperbolic", cost, segment, sample, sample, {"max_radius": max_radius})


def geodesic_for(family: Family, x0, x1) -> SegmentPath:
    """Constant-speed geodesic for families with a squared-distance cost."""
    if family.name in ("hilbert",):
        return SegmentPath(x0, x0, x1, _linear_path(x0, x1), name="line")
    if family.name == "sphere":
        return sphere_geodesic(x0, x1)
    if family.name == "hyperbolic":
        return poincare_geodesic(x0, x1)
    raise PreconditionError(f"family {family.name!r} has no geodesic builder")


FAMILIES = {
    "hilbert": lambda dim=2, **kw: hilbert_family(dim),
    "bregman": lambda dim=2, potential="entropy", mode="forward", **kw: bregman_family(dim, potential, mode),
    "semi_geostrophic": lambda dim=2, g=1.0, **kw: semi_geostrophic_family(dim, g),
    "monge": lambda dim=2, **kw: monge_family(dim=dim),
    "soft_threshold": lambda dim=2, eps=0.5, **kw: soft_threshold_family(dim, eps),
    "sphere": lambda n=2, **kw: sphere_family(n),
    "log_distance": lambda dim=2, **kw: log_distance_family(dim),
    "quartic": lambda **kw: quartic_family(),
    "hyperbolic": lambda **kw: hyperbolic_family(),
}


def make_family(spec: dict) -> Family:
    """Build a family from a JSON-style spec such as ``{"family": "sphere", "n": 2}``."""
    spec = dict(spec)
    name = spec.pop("family", None)
    if name not in FAMILIES:
        raise KeyError(f"unknown family {name!r}; known: {sorted(FAMILIES)}")
    return FAMILIES[name](**spec)


# Stored chord violation of the quartic family: (x0, x1, ybar, y, s); the gap at s = 1/2 is 18.
QUARTIC_WITNESS = (
    np.array([-1.0, -1.0]),
    np.array([1.0, 1.0]),
    np.array([0.0, 0.0]),
    np.array([-1.0, -1.0]),
    0.5,
)


# -- MTW scan regions -------------------------------------------------------------------


def _separated_box_region(dim: int, box=(-2.0, 2.0), min_sep: float = 0.1, coordinatewise: bool = False):
    """Pairs with |x - y| > min_sep, or every |x_i - y_i| > min_sep when the
    mixed Hessian degenerates on coordinate hyperplanes (separable costs)."""
    lo, hi = box

    def region(rng):
        while True:
            x = rng.uniform(lo, hi, size=dim)
            y = rng.uniform(lo, hi, size=dim)
            sep = np.min(np.abs(x - y)) if coordinatewise else np.linalg.norm(x - y)
            if sep > min_sep:
                return x, y

    return region


def _sphere_angle_region(cost: SmoothCost, margin: float = 0.3):
    """Pairs at least ``margin`` from the poles and from the cut locus, so the
    finite-difference stencils around a sample stay inside the smooth domain."""

    def draw(rng):
        return np.array([rng.uniform(margin, math.pi - margin), rng.uniform(-math.pi, math.pi)])

    def region(rng):
        while True:
            u, v = draw(rng), draw(rng)
            if cost.domain(u, v) and sphere_distance(angles_to_point(u), angles_to_point(v)) < math.pi - margin:
                return u, v

    return region


def quadratic_smooth(dim: int = 2) -> SmoothCost:
    """‖x - y‖² with wide steps: the 4th-order stencils are exact on polynomials of
    degree <= 5, so only roundoff remains and it shrinks like 1/h⁴."""
    return SmoothCost(fn=lambda x, y: float(np.sum((x - y) ** 2)), dim=dim, name="quadratic", h2=0.1, h3=0.1, h4=0.1)


def scan_setup(name: str, dim: int = 2) -> tuple[SmoothCost, Callable]:
    """Smooth cost and sampling region for an MTW scan by name."""
    if name == "sphere":
        cost = sphere_angle_cost()
        return cost, _sphere_angle_region(cost)
    builders = {
        "quadratic": quadratic_smooth,
        "log_distance": log_distance_smooth,
        "norm4": norm4_smooth,
        "quartic": lambda d: quartic_family().smooth,
    }
    if name not in builders:
        raise KeyError(f"unknown scan cost {name!r}; known: {sorted(builders) + ['sphere']}")
    cost = builders[name](dim)
    return cost, _separated_box_region(cost.dim, coordinatewise=name == "quartic")
