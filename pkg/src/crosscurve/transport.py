"""Exact discrete optimal transport and lifted c-segments on measures.

``ot_solve`` is a transportation simplex with Bland's rule on a spanning-tree
basis.  Costs equal to +inf are handled lexicographically: the solver first
minimizes the mass on infinite cells and then the finite cost, so a plan of
finite cost is found whenever one exists.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .core import CostSpace, SegmentPath, VerifierConfig, ViolationReport, nncc_check
from .errors import InfeasibleError, OptimalityError, PreconditionError, SolverError
from .families import Family

MERGE_TOL = 1e-12
MARGINAL_TOL = 1e-10


# -- measures and plans -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported probability measure on R^d (support is an ``(k, d)`` array)."""

    support: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        sup = np.atleast_2d(np.asarray(self.support, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if sup.shape[0] != w.size:
            raise ValueError("support and weights have different lengths")
        if np.any(w < -MARGINAL_TOL) or abs(float(w.sum()) - 1.0) > 1e-10:
            raise ValueError("weights must be nonnegative and sum to 1")
        object.__setattr__(self, "support", sup)
        object.__setattr__(self, "weights", np.clip(w, 0.0, None))

    @classmethod
    def make(cls, support, weights, merge_tol: float = MERGE_TOL) -> "DiscreteMeasure":
        """Drop zero weights and merge atoms closer than ``merge_tol`` (max-norm)."""
        sup = np.atleast_2d(np.asarray(support, dtype=float))
        w = np.asarray(weights, dtype=float).ravel()
        pts: list[np.ndarray] = []
        acc: list[float] = []
        for p, wi in zip(sup, w):
            if wi <= 0.0:
                continue
            for k, q in enumerate(pts):
                if np.max(np.abs(p - q)) <= merge_tol:
                    acc[k] += wi
                    break
            else:
                pts.append(p)
                acc.append(float(wi))
        weights_arr = np.asarray(acc)
        return cls(np.array(pts), weights_arr / weights_arr.sum())

    @classmethod
    def dirac(cls, point) -> "DiscreteMeasure":
        return cls(np.atleast_2d(np.asarray(point, dtype=float)), np.ones(1))

    def __len__(self) -> int:
        return self.weights.size

    def to_dict(self) -> dict:
        return {"support": self.support, "weights": self.weights}


@dataclass(frozen=True, eq=False)
class Coupling:
    """A transport plan between two weight vectors."""

    plan: np.ndarray
    mu: np.ndarray
    nu: np.ndarray

    def __post_init__(self):
        check_coupling(self.plan, self.mu, self.nu)


def check_coupling(plan, mu, nu, tol: float = MARGINAL_TOL) -> None:
    plan = np.asarray(plan, dtype=float)
    if np.any(plan < -tol):
        raise ValueError("coupling has negative entries")
    if np.max(np.abs(plan.sum(axis=1) - mu)) > tol or np.max(np.abs(plan.sum(axis=0) - nu)) > tol:
        raise ValueError("coupling marginals do not match")


@dataclass(frozen=True, eq=False)
class ThreePlan:
    """Nonnegative tensor γ[i, j, k] over X0 x X1 x Y."""

    gamma: np.ndarray

    @property
    def pi0(self) -> np.ndarray:
        return self.gamma.sum(axis=1)

    @property
    def pi1(self) -> np.ndarray:
        return self.gamma.sum(axis=0)

    @property
    def m01(self) -> np.ndarray:
        return self.gamma.sum(axis=2)


@dataclass(frozen=True, eq=False)
class OTResult:
    """Optimal plan, value and the dual certificate."""

    coupling: Coupling
    value: float
    u: np.ndarray
    v: np.ndarray
    min_reduced_cost: float
    iterations: int

    def __iter__(self):
        yield self.coupling
        yield self.value

    @property
    def dual_value(self) -> float:
        return float(self.u @ self.coupling.mu + self.v @ self.coupling.nu)


# -- transportation simplex ---------------------------------------------------------------------


def _northwest_corner(a, b):
    n, m = len(a), len(b)
    ra, rb = list(a), list(b)
    flow = {}
    i = j = 0
    for _ in range(n + m - 1):
        q = min(ra[i], rb[j])
        flow[(i, j)] = q
        ra[i] -= q
        rb[j] -= q
        if j == m - 1:
            i += 1
        elif i == n - 1:
            j += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return flow


def _tree_adjacency(basis, n):
    adj: dict[int, list[tuple[int, tuple[int, int]]]] = {}
    for i, j in basis:
        adj.setdefault(i, []).append((n + j, (i, j)))
        adj.setdefault(n + j, []).append((i, (i, j)))
    return adj


def _duals(basis, cost, n, m):
    adj = _tree_adjacency(basis, n)
    pot = [None] * (n + m)
    pot[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for other, (i, j) in adj.get(node, []):
            if pot[other] is None:
                # u_i + v_j = c_ij
                pot[other] = cost[i][j] - pot[node]
                queue.append(other)
    if any(p is None for p in pot):
        raise SolverError("basis is not a spanning tree")
    return pot[:n], pot[n:]


def _tree_path(basis, n, start, goal):
    """Cells on the tree path between two nodes, in order from ``start``."""
    adj = _tree_adjacency(basis, n)
    parent = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for other, cell in adj.get(node, []):
            if other not in parent:
                parent[other] = (node, cell)
                queue.append(other)
    cells = []
    node = goal
    while parent[node] is not None:
        node, cell = parent[node]
        cells.append(cell)
    cells.reverse()
    return cells


def _tree_flows(basis, a, b, n, m):
    """Recompute basic flows exactly from the marginals by peeling leaves."""
    ra = list(a)
    rb = list(b)
    remaining = set(basis)
    flow = {}
    degree = [0] * (n + m)
    for i, j in remaining:
        degree[i] += 1
        degree[n + j] += 1
    while remaining:
        progressed = False
        for cell in sorted(remaining):
            i, j = cell
            if degree[i] == 1:
                q = ra[i]
            elif degree[n + j] == 1:
                q = rb[j]
            else:
                continue
            flow[cell] = q
            ra[i] -= q
            rb[j] -= q
            degree[i] -= 1
            degree[n + j] -= 1
            remaining.discard(cell)
            progressed = True
            break
        if not progressed:
            raise SolverError("basis contains a cycle")
    return flow


def ot_solve(c, mu, nu, tol: float = 1e-12, max_iter: int | None = None) -> OTResult:
    """Exact optimal transport.

    ``c`` is either a cost matrix with ``mu``/``nu`` weight vectors, or a
    :class:`CostSpace` with :class:`DiscreteMeasure` arguments.
    """
    if isinstance(c, CostSpace):
        C = c.matrix(list(mu.support), list(nu.support))
        a, b = mu.weights, nu.weights
    else:
        C = np.asarray(c, dtype=float)
        a = np.asarray(mu.weights if isinstance(mu, DiscreteMeasure) else mu, dtype=float)
        b = np.asarray(nu.weights if isinstance(nu, DiscreteMeasure) else nu, dtype=float)
    n, m = C.shape
    if (n, m) != (a.size, b.size):
        raise ValueError("cost matrix shape does not match the marginals")
    if np.isnan(C).any() or np.any(C == -math.inf):
        raise ValueError("costs must be real or +inf")
    if abs(a.sum() - b.sum()) > 1e-9:
        raise ValueError("marginals have different total mass")
    b = b * (a.sum() / b.sum())
    big = np.isinf(C)
    small = np.where(big, 0.0, C)
    scale = 1.0 + float(np.max(np.abs(small), initial=0.0))
    tol_s = tol * scale
    Cb = big.astype(float).tolist()
    Cs = small.tolist()
    al, bl = a.tolist(), b.tolist()

    flow = _northwest_corner(al, bl)
    basis = set(flow)
    max_iter = max_iter or 200 * (n + m) * (n + m) + 1000
    it = 0
    while True:
        it += 1
        if it > max_iter:
            raise SolverError("transportation simplex exceeded its iteration guard")
        ub, vb = _duals(basis, Cb, n, m)
        us, vs = _duals(basis, Cs, n, m)
        entering = None
        for i in range(n):
            for j in range(m):
                if (i, j) in basis:
                    continue
                rb_ = Cb[i][j] - ub[i] - vb[j]
                rs_ = Cs[i][j] - us[i] - vs[j]
                if rb_ < -1e-9 or (abs(rb_) <= 1e-9 and rs_ < -tol_s):
                    entering = (i, j)
                    break
            if entering is not None:
                break
        if entering is None:
            break
        i0, j0 = entering
        path = _tree_path(basis, n, n + j0, i0)
        # Cycle: entering (+), then alternating signs along the path from column j0 back to row i0.
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[cell] for cell in minus)
        leaving = min((cell for cell in minus if flow[cell] <= theta), key=lambda cell: cell[0] * m + cell[1])
        for cell in minus:
            flow[cell] -= theta
        for cell in plus:
            flow[cell] += theta
        flow[entering] = theta
        basis.add(entering)
        basis.discard(leaving)
        del flow[leaving]

    flow = _tree_flows(basis, al, bl, n, m)
    plan = np.zeros((n, m))
    for (i, j), q in flow.items():
        plan[i, j] = max(q, 0.0)
    if np.any(plan[big] > MARGINAL_TOL):
        raise InfeasibleError("every transport plan charges an infinite cost")
    plan[big] = 0.0
    u, v = np.array(us), np.array(vs)
    finite = ~big
    red = (small - u[:, None] - v[None, :])[finite]
    value = float(np.sum(small * plan))
    return OTResult(Coupling(plan, a, b), value, u, v, float(red.min()) if red.size else 0.0, it)


def transport_cost(base: CostSpace) -> CostSpace:
    """Optimal transport cost T_c between discrete measures, as a CostSpace."""

    def fn(mu, nu):
        return ot_solve(base, mu, nu).value

    return CostSpace(fn=fn, name=f"T[{base.name}]")


# -- gluing and lifts ---------------------------------------------------------------------------


def glue(pi0, pi1, tol: float = MARGINAL_TOL) -> ThreePlan:
    """γ[i, j, k] = π0[i, k] π1[j, k] / ν[k], conditional independence given ν."""
    P0 = np.asarray(pi0.plan if isinstance(pi0, Coupling) else pi0, dtype=float)
    P1 = np.asarray(pi1.plan if isinstance(pi1, Coupling) else pi1, dtype=float)
    nu0, nu1 = P0.sum(axis=0), P1.sum(axis=0)
    if nu0.shape != nu1.shape or np.max(np.abs(nu0 - nu1)) > tol:
        raise ValueError("plans do not share their second marginal")
    nu = 0.5 * (nu0 + nu1)
    safe = np.where(nu > 0, nu, 1.0)
    gamma = P0[:, None, :] * P1[None, :, :] / safe[None, None, :]
    gamma[:, :, nu <= 0] = 0.0
    return ThreePlan(gamma)


def glue_northwest(pi0, pi1, tol: float = MARGINAL_TOL) -> ThreePlan:
    """Alternative glue: per atom k, the northwest-corner coupling of the two conditionals."""
    P0 = np.asarray(pi0.plan if isinstance(pi0, Coupling) else pi0, dtype=float)
    P1 = np.asarray(pi1.plan if isinstance(pi1, Coupling) else pi1, dtype=float)
    if np.max(np.abs(P0.sum(axis=0) - P1.sum(axis=0))) > tol:
        raise ValueError("plans do not share their second marginal")
    gamma = np.zeros((P0.shape[0], P1.shape[0], P0.shape[1]))
    for k in range(P0.shape[1]):
        if P0[:, k].sum() <= 0:
            continue
        for (i, j), q in _northwest_corner(P0[:, k].tolist(), P1[:, k].tolist()).items():
            gamma[i, j, k] = max(q, 0.0)
    return ThreePlan(gamma)


GLUES = {"independent": glue, "northwest": glue_northwest}


def _check_optimal(base: CostSpace, src: DiscreteMeasure, nu: DiscreteMeasure, plan: np.ndarray, tol: float):
    C = base.matrix(list(src.support), list(nu.support))
    val = float(np.sum(np.where(plan > 0, C, 0.0) * plan))
    best = ot_solve(C, src.weights, nu.weights).value
    gap = val - best
    if gap > tol * (1.0 + abs(best)):
        raise OptimalityError(f"endpoint plan is not optimal (duality gap {gap:.3g})", residual=gap)


@dataclass(frozen=True, eq=False)
class LiftedSegment:
    """A lifted c-segment with access to the pushed-forward plan π(s)."""

    segment: SegmentPath
    triples: list
    nu: DiscreteMeasure
    base: CostSpace = field(repr=False)

    def plan_cost(self, s: float) -> float:
        """Σ γ_ijk c(Λ_s(x0_i, x1_j, y_k), y_k), the cost of the lifted plan."""
        total = 0.0
        for w, seg, k in self.triples:
            total += w * self.base.eval(seg.at(s), self.nu.support[k])
        return total

    def optimality_residual(self, s: float) -> float:
        mu_s = self.segment.at(s)
        return abs(self.plan_cost(s) - ot_solve(self.base, mu_s, self.nu).value)


def lifted_segment(
    gamma: ThreePlan,
    seg_builder: Callable[[Any, Any, Any], SegmentPath],
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    nu: DiscreteMeasure,
    base: CostSpace | None = None,
    tol: float = 1e-9,
) -> LiftedSegment:
    """μ(s) = (Λ_s)#γ with Λ_s(x0, x1, y) = x(s) of the base segment through (x0, x1, y).

    When ``base`` is given the endpoint plans (p1,p3)#γ and (p2,p3)#γ are
    checked against ``ot_solve``.
    """
    G = gamma.gamma
    if G.shape != (len(mu0), len(mu1), len(nu)):
        raise ValueError("3-plan shape does not match the measures")
    if np.max(np.abs(G.sum(axis=(1, 2)) - mu0.weights)) > MARGINAL_TOL or np.max(
        np.abs(G.sum(axis=(0, 2)) - mu1.weights)
    ) > MARGINAL_TOL:
        raise ValueError("3-plan marginals do not match mu0 and mu1")
    if base is not None:
        _check_optimal(base, mu0, nu, gamma.pi0, tol)
        _check_optimal(base, mu1, nu, gamma.pi1, tol)
    triples = []
    for i, j, k in zip(*np.nonzero(G > 0)):
        seg = seg_builder(mu0.support[i], mu1.support[j], nu.support[k])
        triples.append((float(G[i, j, k]), seg, int(k)))

    def path(s):
        pts = [seg.at(s) for _, seg, _ in triples]
        return DiscreteMeasure.make(pts, [w for w, _, _ in triples])

    seg = SegmentPath(nu, mu0, mu1, path, name="lifted")
    return LiftedSegment(seg, triples, nu, base)


def random_measure(n_atoms: int, box=(-2.0, 2.0), seed: int = 0, dim: int = 2, sample_point=None) -> DiscreteMeasure:
    """Atoms uniform in ``box^dim`` (or from ``sample_point(rng)``), Dirichlet(1) weights."""
    if n_atoms < 1:
        raise ValueError("n_atoms must be at least 1")
    rng = np.random.default_rng(seed)
    return _random_measure(rng, n_atoms, box, dim, sample_point)


def _random_measure(rng, n_atoms, box, dim, sample_point):
    if sample_point is None:
        pts = rng.uniform(box[0], box[1], size=(n_atoms, dim))
    else:
        pts = np.array([sample_point(rng) for _ in range(n_atoms)])
    w = rng.dirichlet(np.ones(n_atoms)) if n_atoms > 1 else np.ones(1)
    return DiscreteMeasure(pts, w)


def measure_sampler(family: Family, atoms=(3, 6)):
    def sampler(rng, n):
        return [_random_measure(rng, int(rng.integers(atoms[0], atoms[1] + 1)), None, None, family.sample_base) for _ in range(n)]

    return sampler


def lift_family(mu0, mu1, nu, family: Family, glue_fn=glue) -> LiftedSegment:
    base = family.cost
    pi0 = ot_solve(base, mu0, nu).coupling
    pi1 = ot_solve(base, mu1, nu).coupling
    return lifted_segment(glue_fn(pi0, pi1), family.segment, mu0, mu1, nu, base)


def wasserstein_nncc_check(
    mu0: DiscreteMeasure,
    mu1: DiscreteMeasure,
    nu: DiscreteMeasure,
    base: Family,
    cfg: VerifierConfig,
    atoms=(3, 6),
    glue_fn=glue,
) -> tuple[ViolationReport, float]:
    """NNCC chord check of the lifted segment for T_c.

    Returns the report and the largest deviation between the lifted plan's
    cost and the optimal value T_c(μ(s), ν) over the grid.
    """
    lift = lift_family(mu0, mu1, nu, base, glue_fn)
    cost = CostSpace(fn=lambda a, b: ot_solve(base.cost, a, b).value, name=f"T[{base.cost.name}]", sampler=measure_sampler(base, atoms))
    report = nncc_check(lift.segment, cost, cfg)
    residual = max(lift.optimality_residual(s) for s in cfg.s_grid)
    return report, residual


# -- counterexample -----------------------------------------------------------------------------

CE_X0 = (np.array([-1.0, 0.0]), np.array([1.0, 0.0]))
CE_X1 = (np.array([0.0, -1.0]), np.array([0.0, 1.0]))
CE_YBAR = np.array([-0.5, 0.0])
CE_Y = np.array([0.5, 0.0])


def ce_curve(k: int, s: float) -> np.ndarray:
    """The closed-form c-segments x_1 .. x_4 of the log-distance counterexample."""
    if k in (1, 4):
        den = 8 * s * s - 12 * s + 5
        px = -(4 * s * s - 9 * s + 5) / den
        py = s / den
        return np.array([px, py if k == 1 else -py])
    if k in (2, 3):
        den = 8 * s * s - 4 * s + 5
        px = -(4 * s * s + s - 5) / den
        py = 9 * s / den
        return np.array([px, py if k == 2 else -py])
    raise ValueError("curve index must be 1, 2, 3 or 4")


# triple (x0 index, x1 index) of each curve
CE_TRIPLES = {1: (0, 1), 2: (1, 1), 3: (1, 0), 4: (0, 0)}


def _log_cost(x, y) -> float:
    return -math.log(float(np.linalg.norm(np.asarray(x) - np.asarray(y))))


def ce_f(curves: Sequence[int], s: float) -> float:
    """T_c(μ(s), δ_ybar) - T_c(μ(s), δ_y) for μ(s) uniform on the given curves."""
    w = 1.0 / len(curves)
    return sum(w * (_log_cost(ce_curve(k, s), CE_YBAR) - _log_cost(ce_curve(k, s), CE_Y)) for k in curves)


@dataclass(frozen=True)
class CounterexampleResult:
    s: np.ndarray
    f_mu1: np.ndarray
    f_mu2: np.ndarray
    t_grid: np.ndarray
    f_t: np.ndarray
    min_max: float
    report: ViolationReport

    def rows(self, which: str):
        if which == "mu1":
            f = self.f_mu1
        elif which == "mu2":
            f = self.f_mu2
        else:
            f = self.f_t[int(which)]
        return list(zip(self.s.tolist(), f.tolist()))


def counterexample_lmp(n_s: int = 101, n_t: int = 11, tol: float = 1e-12) -> CounterexampleResult:
    """f(s) for every glue between the two extreme 3-plans of the counterexample.

    μ¹(s) = ½δ_{x1(s)} + ½δ_{x3(s)} and μ²(s) = ½δ_{x2(s)} + ½δ_{x4(s)}; the
    targets ν = δ_ybar and σ = δ_y are Dirac masses, so T_c is an average.
    The maximum principle asks f(s) <= max(f(0), f(1)) = 0; the report
    records min over t of max over s of f^t(s), which is positive.
    """
    s = np.linspace(0.0, 1.0, n_s)
    f1 = np.array([ce_f((1, 3), v) for v in s])
    f2 = np.array([ce_f((2, 4), v) for v in s])
    t = np.linspace(0.0, 1.0, n_t)
    ft = (1 - t)[:, None] * f1[None, :] + t[:, None] * f2[None, :]
    interior = (s > 0) & (s < 1)
    per_t = ft[:, interior].max(axis=1)
    k = int(np.argmin(per_t))
    j = int(np.argmax(np.where(interior, ft[k], -np.inf)))
    ends = max(ft[k, 0], ft[k, -1])
    min_max = float(per_t[k])
    witness = {"s": float(s[j]), "y": {"t": float(t[k]), "sigma": CE_Y, "nu": CE_YBAR}, "lhs": float(ft[k, j]), "rhs": float(ends)}
    report = ViolationReport("lmp", bool(min_max <= tol), min_max, tol, witness, int(ft.size), None)
    return CounterexampleResult(s, f1, f2, t, ft, min_max, report)
