"""Cost spaces, segments and the sampled chord verifiers.

A :class:`CostSpace` wraps a cost ``c(x, y)``; points can be vectors, matrices,
measures or tuples, as long as the cost function understands them.  A
:class:`SegmentPath` is a base point ``ybar`` with a path ``s -> x(s)``.  The
checks evaluate the cost on a grid of ``s`` values against sampled ``y``
points and report the worst gap in a :class:`ViolationReport`.

A passing report means that no violation was found on the sampled points; it
is not a proof for all ``y``.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from .errors import (
    OptimalityError,
    ParametrizationError,
    PreconditionError,
    SegmentInvalidError,
)
from .extreal import INF, NEG_INF, arr_combo, arr_sub
from .reporting import to_jsonable

CHECK_KINDS = ("nncc", "lmp", "conv", "one_convex", "pc")


def uniform_grid(n: int = 33) -> tuple[float, ...]:
    """``n`` equispaced nodes on [0, 1] with exact endpoints."""
    if n < 2:
        raise ValueError("a grid needs at least two nodes")
    return tuple(float(v) for v in np.linspace(0.0, 1.0, n))


@dataclass(frozen=True, eq=False)
class CostSpace:
    """An evaluable cost over a pair of spaces.

    ``fn(x, y)`` returns a float, possibly ``±inf``.  ``batch(xs, ys)`` is an
    optional vectorized form returning the ``len(xs) x len(ys)`` matrix.
    ``sampler(rng, n)`` draws ``n`` points of Y for the verifiers, and
    ``same_space`` tells them whether points of X may be used as ``y``.
    """

    fn: Callable[[Any, Any], float]
    name: str = "cost"
    dim_x: int | None = None
    dim_y: int | None = None
    sampler: Callable[[np.random.Generator, int], list] | None = None
    batch: Callable[[Sequence, Sequence], np.ndarray] | None = None
    same_space: bool = True

    def eval(self, x, y) -> float:
        v = float(self.fn(x, y))
        if math.isnan(v):
            raise ValueError(f"cost {self.name!r} produced an undefined value")
        return v

    __call__ = eval

    def matrix(self, xs: Sequence, ys: Sequence) -> np.ndarray:
        if self.batch is not None:
            out = np.asarray(self.batch(xs, ys), dtype=float).reshape(len(xs), len(ys))
        else:
            out = np.array([[float(self.fn(x, y)) for y in ys] for x in xs], dtype=float)
            out = out.reshape(len(xs), len(ys))
        if np.isnan(out).any():
            raise ValueError(f"cost {self.name!r} produced an undefined value")
        return out


@dataclass(frozen=True, eq=False)
class SegmentPath:
    """A base point ``base_y`` and a path with stored endpoints.

    ``at(0)`` and ``at(1)`` return the stored endpoint objects themselves;
    ``path`` is only called for ``0 < s < 1``.
    """

    base_y: Any
    x0: Any
    x1: Any
    path: Callable[[float], Any]
    name: str = "segment"
    info: dict = field(default_factory=dict)

    def at(self, s: float):
        if s == 0:
            return self.x0
        if s == 1:
            return self.x1
        if not 0.0 < s < 1.0:
            raise ValueError(f"s = {s} outside [0, 1]")
        return self.path(s)

    def map(self, f: Callable[[Any], Any], g: Callable[[Any], Any] | None = None) -> "SegmentPath":
        """Push the path through ``f`` and the base point through ``g`` (default ``f``)."""
        g = f if g is None else g
        return SegmentPath(
            base_y=g(self.base_y),
            x0=f(self.x0),
            x1=f(self.x1),
            path=lambda s: f(self.path(s)),
            name=self.name,
            info=dict(self.info),
        )


def constant_segment(x, base_y) -> SegmentPath:
    return SegmentPath(base_y, x, x, lambda s: x, name="constant")


@dataclass(frozen=True)
class VerifierConfig:
    """Sampling plan for the chord checks.

    The ``y`` samples are ``n_y`` draws from ``sampler`` (or the cost's own
    sampler, or a uniform box of dimension ``dim_y``), then the structured
    points ``ybar, x0, x1, x(s)`` when X = Y, then ``extra_y``.
    """

    s_grid: tuple[float, ...] = field(default_factory=uniform_grid)
    n_y: int = 64
    seed: int = 0
    box: tuple[float, float] = (-2.0, 2.0)
    tol: float = 1e-9
    structured: bool = True
    extra_y: tuple = ()
    sampler: Callable[[np.random.Generator, int], list] | None = None
    undefined_rhs_rule: float = INF

    def __post_init__(self):
        grid = tuple(float(s) for s in self.s_grid)
        object.__setattr__(self, "s_grid", grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise ValueError("s_grid must be strictly increasing")
        if grid[0] != 0.0 or grid[-1] != 1.0:
            raise ValueError("s_grid must contain 0 and 1")
        if self.tol < 0:
            raise ValueError("tol must be nonnegative")
        if self.undefined_rhs_rule != INF:
            raise ValueError("undefined right-hand sides always resolve to +inf")
        if self.box[1] <= self.box[0]:
            raise ValueError("box must satisfy lo < hi")

    def replace(self, **changes) -> "VerifierConfig":
        return dataclasses.replace(self, **changes)

    def is_equispaced(self) -> bool:
        d = np.diff(self.s_grid)
        return bool(np.allclose(d, d[0], rtol=1e-12, atol=1e-15))


@dataclass(frozen=True)
class ViolationReport:
    """Worst gap of one check.

    ``passed`` is True when no sampled violation exceeds ``tol``.  It means
    "no violation found", which on sampled ``y`` is weaker than a proof.
    ``inconclusive`` marks runs whose underlying solver could not certify
    optimality, in which case ``passed`` is False but no failure is claimed.
    """

    check_kind: str
    passed: bool
    max_gap: float
    tol: float
    witness: dict | None
    n_evaluated: int
    seed: int | None = None
    inconclusive: bool = False

    def to_dict(self) -> dict:
        return {
            "check_kind": self.check_kind,
            "passed": bool(self.passed),
            "max_gap": float(self.max_gap),
            "tol": float(self.tol),
            "witness": to_jsonable(self.witness),
            "n_evaluated": int(self.n_evaluated),
            "seed": self.seed,
            "inconclusive": bool(self.inconclusive),
        }


def _report(kind: str, gaps: np.ndarray, tol: float, witness_fn, n: int, seed) -> ViolationReport:
    if gaps.size == 0:
        return ViolationReport(kind, True, NEG_INF, tol, None, 0, seed)
    idx = np.unravel_index(int(np.argmax(gaps)), gaps.shape)
    max_gap = float(gaps[idx])
    return ViolationReport(kind, bool(max_gap <= tol), max_gap, tol, witness_fn(idx), n, seed)


def merge_reports(reports: Sequence[ViolationReport]) -> ViolationReport:
    """Combine reports of one kind: worst gap wins, counts add up."""
    if not reports:
        raise ValueError("no reports to merge")
    worst = max(reports, key=lambda r: r.max_gap)
    return dataclasses.replace(
        worst,
        passed=all(r.passed for r in reports),
        n_evaluated=sum(r.n_evaluated for r in reports),
        inconclusive=any(r.inconclusive for r in reports),
    )


# -- sampling ----------------------------------------------------------------


def sample_ys(seg: SegmentPath | None, c: CostSpace, cfg: VerifierConfig) -> list:
    """Random draws plus structured points, deterministic in ``cfg.seed``."""
    rng = np.random.default_rng(cfg.seed)
    sampler = cfg.sampler or c.sampler
    ys: list = []
    if cfg.n_y > 0:
        if sampler is not None:
            ys.extend(sampler(rng, cfg.n_y))
        elif c.dim_y is not None:
            lo, hi = cfg.box
            ys.extend(rng.uniform(lo, hi, size=(cfg.n_y, c.dim_y)))
        else:
            raise PreconditionError(f"cost {c.name!r} has no sampler and no dim_y")
    if cfg.structured and seg is not None:
        ys.append(seg.base_y)
        if c.same_space:
            ys.append(seg.x0)
            ys.append(seg.x1)
            ys.extend(seg.at(s) for s in cfg.s_grid if 0.0 < s < 1.0)
    ys.extend(cfg.extra_y)
    return ys


def _difference_table(seg: SegmentPath, c: CostSpace, cfg: VerifierConfig, ys: list) -> np.ndarray:
    """D[k, j] = c(x(s_k), ybar) - c(x(s_k), y_j) over the whole grid."""
    xs = [seg.at(s) for s in cfg.s_grid]
    C = c.matrix(xs, [seg.base_y] + list(ys))
    base = C[:, 0]
    if not (np.isfinite(base[0]) and np.isfinite(base[-1])):
        raise PreconditionError("endpoint cost to the base point is not finite")
    bad = np.flatnonzero(~np.isfinite(base))
    if bad.size:
        s = cfg.s_grid[int(bad[0])]
        raise SegmentInvalidError(f"c(x(s), ybar) is not finite at s = {s}", s=s)
    return arr_sub(base[:, None], C[:, 1:], undefined=INF)


def _holds_gap(lhs, rhs):
    """lhs - rhs, with inf <= inf and -inf <= -inf counted as satisfied."""
    return arr_sub(lhs, rhs, undefined=NEG_INF)


def chord_gaps(seg: SegmentPath, c: CostSpace, cfg: VerifierConfig, ys: list | None = None):
    """Signed chord gaps for interior grid nodes.

    Returns ``(gaps, interior_s, ys, lhs, rhs)`` where ``gaps[k, j]`` is the
    gap at the k-th interior node against ``ys[j]``.
    """
    ys = sample_ys(seg, c, cfg) if ys is None else ys
    D = _difference_table(seg, c, cfg, ys)
    grid = np.asarray(cfg.s_grid)
    inner = np.flatnonzero((grid > 0) & (grid < 1))
    lhs = D[inner]
    rhs = np.stack([arr_combo(D[0], D[-1], grid[k], undefined=cfg.undefined_rhs_rule) for k in inner])
    rhs = rhs.reshape(lhs.shape)
    return _holds_gap(lhs, rhs), grid[inner], ys, lhs, rhs


def _chord_witness(s_vals, ys, lhs, rhs):
    def make(idx):
        k, j = idx
        return {"s": float(s_vals[k]), "y": ys[j], "lhs": float(lhs[k, j]), "rhs": float(rhs[k, j])}

    return make


def nncc_check(seg: SegmentPath, c: CostSpace, cfg: VerifierConfig, ys: list | None = None) -> ViolationReport:
    """Chord inequality of a variational c-segment at the sampled ``y``.

    gap = [c(x(s),ybar) - c(x(s),y)] - chord, with undefined chords read as +inf.
    """
    gaps, s_vals, ys, lhs, rhs = chord_gaps(seg, c, cfg, ys)
    return _report("nncc", gaps, cfg.tol, _chord_witness(s_vals, ys, lhs, rhs), gaps.size, cfg.seed)


def lmp_check(seg: SegmentPath, c: CostSpace, cfg: VerifierConfig, ys: list | None = None) -> ViolationReport:
    """Maximum-principle variant: the chord is replaced by the larger endpoint value."""
    ys = sample_ys(seg, c, cfg) if ys is None else ys
    D = _difference_table(seg, c, cfg, ys)
    grid = np.asarray(cfg.s_grid)
    inner = np.flatnonzero((grid > 0) & (grid < 1))
    lhs = D[inner]
    rhs = np.broadcast_to(np.maximum(D[0], D[-1]), lhs.shape)
    gaps = _holds_gap(lhs, rhs)
    return _report("lmp", gaps, cfg.tol, _chord_witness(grid[inner], ys, lhs, rhs), gaps.size, cfg.seed)


def conv_check(seg: SegmentPath, c: CostSpace, cfg: VerifierConfig, ys: list | None = None) -> ViolationReport:
    """Discrete convexity of g(s) = c(x(s),ybar) - c(x(s),y) on an equispaced grid.

    The reported gap is ``-(g(s-h) - 2 g(s) + g(s+h)) / (1 + max|g|)`` so that
    ``passed`` is equivalent to ``max_gap <= tol`` with a magnitude-scaled
    tolerance.
    """
    if not cfg.is_equispaced():
        raise PreconditionError("conv_check needs an equispaced s_grid")
    ys = sample_ys(seg, c, cfg) if ys is None else ys
    g = _difference_table(seg, c, cfg, ys)
    left, mid, right = g[:-2], g[1:-1], g[2:]
    with np.errstate(invalid="ignore"):
        second = left - 2.0 * mid + right
    undefined = np.isnan(second)
    second = np.where(undefined & (mid == INF), NEG_INF, second)
    second = np.where(np.isnan(second), INF, second)
    finite = np.where(np.isfinite(g), np.abs(g), 0.0)
    scale = 1.0 + finite.max(axis=0)
    gaps = -second / scale[None, :]
    grid = np.asarray(cfg.s_grid)

    def witness(idx):
        k, j = idx
        return {
            "s": float(grid[k + 1]),
            "y": ys[j],
            "lhs": float(2.0 * mid[k, j]),
            "rhs": float(left[k, j] + right[k, j]),
        }

    return _report("conv", gaps, cfg.tol, witness, gaps.size, cfg.seed)


def one_convexity_check(seg: SegmentPath, d2: CostSpace, cfg: VerifierConfig) -> ViolationReport:
    """d²(x(s),ybar) <= (1-s)d²(x0,ybar) + s d²(x1,ybar) - s(1-s) d²(x0,x1)."""
    a0 = d2.eval(seg.x0, seg.base_y)
    a1 = d2.eval(seg.x1, seg.base_y)
    d01 = d2.eval(seg.x0, seg.x1)
    rows = []
    for s in cfg.s_grid:
        lhs = d2.eval(seg.at(s), seg.base_y)
        rhs = (1 - s) * a0 + s * a1 - s * (1 - s) * d01
        rows.append((s, lhs, rhs))
    gaps = np.array([lhs - rhs for _, lhs, rhs in rows])

    def witness(idx):
        s, lhs, rhs = rows[idx[0]]
        return {"s": s, "y": seg.base_y, "lhs": lhs, "rhs": rhs}

    return _report("one_convex", gaps, cfg.tol, witness, gaps.size, cfg.seed)


def check_constant_speed(geodesic: SegmentPath, d2: CostSpace, grid: Sequence[float], rtol: float = 1e-6) -> float:
    """Largest deviation of d(γ(s), γ(r)) from |s - r| d(γ(0), γ(1)), relative to the length."""
    length = math.sqrt(max(d2.eval(geodesic.x0, geodesic.x1), 0.0))
    pts = [geodesic.at(s) for s in grid]
    worst = 0.0
    for a in range(len(grid)):
        for b in (0, len(grid) - 1, min(a + 1, len(grid) - 1)):
            d = math.sqrt(max(d2.eval(pts[a], pts[b]), 0.0))
            worst = max(worst, abs(d - abs(grid[a] - grid[b]) * length))
    rel = worst / max(length, 1.0)
    if rel > rtol:
        raise ParametrizationError(f"geodesic is not constant speed (deviation {rel:.3g})")
    return rel


def pc_check(geodesic: SegmentPath, d2: CostSpace, cfg: VerifierConfig, speed_rtol: float = 1e-6) -> ViolationReport:
    """Positive-curvature comparison along a constant-speed geodesic.

    gap = [(1-s)d²(γ0,y) + s d²(γ1,y) - s(1-s)d²(γ0,γ1)] - d²(γ(s),y).
    """
    check_constant_speed(geodesic, d2, cfg.s_grid, speed_rtol)
    ys = sample_ys(None, d2, cfg)
    if cfg.structured:
        ys = ys + [geodesic.at(s) for s in cfg.s_grid if 0 < s < 1]
    inner = [s for s in cfg.s_grid if 0 < s < 1]
    C = d2.matrix([geodesic.at(s) for s in inner], ys)
    e0 = d2.matrix([geodesic.x0], ys)[0]
    e1 = d2.matrix([geodesic.x1], ys)[0]
    L2 = d2.eval(geodesic.x0, geodesic.x1)
    s_col = np.asarray(inner)[:, None]
    rhs = (1 - s_col) * e0[None, :] + s_col * e1[None, :] - s_col * (1 - s_col) * L2
    gaps = rhs - C

    def witness(idx):
        k, j = idx
        return {"s": float(inner[k]), "y": ys[j], "lhs": float(C[k, j]), "rhs": float(rhs[k, j])}

    return _report("pc", gaps, cfg.tol, witness, gaps.size, cfg.seed)


def geodesic_is_vcs(
    geodesic: SegmentPath, d2: CostSpace, t: float, cfg: VerifierConfig, speed_rtol: float = 1e-6
) -> ViolationReport:
    """Run :func:`nncc_check` on the geodesic with base point γ(t)."""
    check_constant_speed(geodesic, d2, cfg.s_grid, speed_rtol)
    seg = SegmentPath(geodesic.at(t), geodesic.x0, geodesic.x1, geodesic.path, name="geodesic")
    ys = sample_ys(None, d2, cfg)
    if cfg.structured:
        ys = ys + [geodesic.at(s) for s in cfg.s_grid if 0 < s < 1]
    return nncc_check(seg, d2, cfg, ys=ys)


# -- products and submersions --------------------------------------------------


def _factor_dim_ok(point, dim) -> bool:
    if dim is None:
        return True
    return np.asarray(point).shape == (dim,)


def product_cost(c1: CostSpace, c2: CostSpace) -> CostSpace:
    """Sum cost on pairs ``(p1, p2)``."""

    def split(p):
        if not isinstance(p, tuple) or len(p) != 2:
            raise ValueError("product points are pairs (p1, p2)")
        return p

    def fn(x, y):
        x1, x2 = split(x)
        y1, y2 = split(y)
        if not (_factor_dim_ok(x1, c1.dim_x) and _factor_dim_ok(x2, c2.dim_x)):
            raise ValueError("dimension mismatch in product point x")
        if not (_factor_dim_ok(y1, c1.dim_y) and _factor_dim_ok(y2, c2.dim_y)):
            raise ValueError("dimension mismatch in product point y")
        a, b = c1.eval(x1, y1), c2.eval(x2, y2)
        if math.isinf(a) and math.isinf(b) and (a > 0) != (b > 0):
            raise ValueError("product cost is +inf + -inf")
        return a + b

    def batch(xs, ys):
        A = c1.matrix([split(x)[0] for x in xs], [split(y)[0] for y in ys])
        B = c2.matrix([split(x)[1] for x in xs], [split(y)[1] for y in ys])
        if (np.isinf(A) & np.isinf(B) & (np.sign(A) != np.sign(B))).any():
            raise ValueError("product cost is +inf + -inf")
        return A + B

    sampler = None
    if c1.sampler is not None and c2.sampler is not None:

        def sampler(rng, n):
            return list(zip(c1.sampler(rng, n), c2.sampler(rng, n)))

    return CostSpace(
        fn=fn,
        name=f"({c1.name})x({c2.name})",
        sampler=sampler,
        batch=batch,
        same_space=c1.same_space and c2.same_space,
    )


def product_segment(seg1: SegmentPath, seg2: SegmentPath) -> SegmentPath:
    return SegmentPath(
        base_y=(seg1.base_y, seg2.base_y),
        x0=(seg1.x0, seg2.x0),
        x1=(seg1.x1, seg2.x1),
        path=lambda s: (seg1.at(s), seg2.at(s)),
        name=f"({seg1.name})x({seg2.name})",
    )


def submersion_project(
    total_seg: SegmentPath,
    P1: Callable | None,
    P2: Callable | None,
    c_total: CostSpace,
    c_base: CostSpace,
    tol: float = 1e-9,
) -> SegmentPath:
    """Project a segment through a cost submersion ``(P1, P2)``.

    The endpoints must be optimal in their fibers, that is
    ``c_total(x_i, y0) = c_base(P1 x_i, P2 y0)``.  ``None`` projections mean
    identity; with both identities the input segment is returned unchanged.
    """
    p1 = P1 or (lambda v: v)
    p2 = P2 or (lambda v: v)
    y0 = total_seg.base_y
    for x in (total_seg.x0, total_seg.x1):
        up = c_total.eval(x, y0)
        down = c_base.eval(p1(x), p2(y0))
        res = abs(up - down)
        if not res <= tol * (1.0 + abs(down)):
            raise OptimalityError(f"segment endpoint is not optimal in its fiber (residual {res:.3g})", residual=res)
    if P1 is None and P2 is None:
        return total_seg
    return SegmentPath(
        base_y=p2(y0),
        x0=p1(total_seg.x0),
        x1=p1(total_seg.x1),
        path=lambda s: p1(total_seg.at(s)),
        name=f"projected {total_seg.name}",
    )
