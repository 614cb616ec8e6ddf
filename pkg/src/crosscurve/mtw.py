"""Finite-difference cross-curvature for smooth costs on open sets of R^n.

All derivatives come from central stencils.  The default stencils are
fourth-order accurate; ``order=2`` gives the classical three-point ones.
Directional derivatives are taken directly along ξ and η, so the MTW tensor

    S(ξ, η) = c_{ik m̄} c^{m̄ r} c_{r j̄ l̄} ξ^i ξ^k η^j η^l - c_{i j̄ k l̄} ξ^i η^j ξ^k η^l

needs one 2-D stencil for the fourth-order term, two families of 2-D stencils
for the third-order terms and the mixed Hessian ``H[i, j] = ∂x_i ∂y_j c``,
whose inverse supplies ``c^{m̄ r}``.  With this convention S vanishes for the
quadratic cost and is nonnegative on the round sphere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import CostSpace, SegmentPath, uniform_grid
from .errors import ContinuationError, DegeneracyError, DomainError, NotSmoothError

FD_TOL = 1e-3
ORTH_TOL = 1e-6
MAX_COND = 1e8

_FIRST = {
    2: (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    4: (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([1.0, -8.0, 8.0, -1.0]) / 12.0),
}
_SECOND = {
    2: (np.array([-1.0, 0.0, 1.0]), np.array([1.0, -2.0, 1.0])),
    4: (np.array([-2.0, -1.0, 0.0, 1.0, 2.0]), np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0),
}


def _always(x, y) -> bool:
    return True


@dataclass(frozen=True, eq=False)
class SmoothCost:
    """A C^4 cost on an open domain of R^dim x R^dim.

    ``h1`` is the step for first derivatives; ``h2``, ``h3``, ``h4`` are the
    steps for the mixed Hessian, the third-order and the fourth-order terms.
    ``order`` selects second- or fourth-order accurate stencils.
    """

    fn: Callable[[np.ndarray, np.ndarray], float]
    dim: int
    domain: Callable[[np.ndarray, np.ndarray], bool] = _always
    name: str = "smooth cost"
    h1: float = 1e-3
    h2: float = 1e-2
    h3: float = 1e-2
    h4: float = 1e-2
    order: int = 4
    smooth: bool = True

    def __post_init__(self):
        if self.order not in (2, 4):
            raise ValueError("order must be 2 or 4")

    def eval(self, x, y) -> float:
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if not self.domain(x, y):
            raise DomainError(f"{self.name}: point outside the smooth domain")
        return float(self.fn(x, y))

    __call__ = eval

    @property
    def cost_space(self) -> CostSpace:
        return CostSpace(fn=self.eval, name=self.name, dim_x=self.dim, dim_y=self.dim)

    def with_steps(self, **steps) -> "SmoothCost":
        from dataclasses import replace

        return replace(self, **steps)


@dataclass(frozen=True)
class MtwSample:
    x: np.ndarray
    y: np.ndarray
    xi: np.ndarray
    eta: np.ndarray
    S: float
    A: float

    def to_dict(self) -> dict:
        return {"x": self.x, "y": self.y, "xi": self.xi, "eta": self.eta, "S": self.S, "A": self.A}


def _require_smooth(c) -> SmoothCost:
    if not isinstance(c, SmoothCost) or not c.smooth:
        raise NotSmoothError("operation needs a SmoothCost with a C^4 cost")
    return c


def _mixed(c: SmoothCost, x, y, dx, dy, kx: int, ky: int, hx: float, hy: float) -> float:
    """∂^kx_a ∂^ky_b c(x + a dx, y + b dy) at a = b = 0 with kx, ky in {1, 2}."""
    ox, wx = (_FIRST if kx == 1 else _SECOND)[c.order]
    oy, wy = (_FIRST if ky == 1 else _SECOND)[c.order]
    total = 0.0
    for p, wp in zip(ox, wx):
        if wp == 0.0:
            continue
        xp = x + p * hx * dx
        for q, wq in zip(oy, wy):
            if wq == 0.0:
                continue
            total += wp * wq * c.eval(xp, y + q * hy * dy)
    return total / (hx**kx * hy**ky)


def grad_y(c: SmoothCost, x, y) -> np.ndarray:
    """∇_y c(x, y) by central differences with step ``h1``."""
    c = _require_smooth(c)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    offs, w = _FIRST[c.order]
    eye = np.eye(c.dim)
    g = np.empty(c.dim)
    for j in range(c.dim):
        g[j] = sum(wq * c.eval(x, y + q * c.h1 * eye[j]) for q, wq in zip(offs, w)) / c.h1
    return g


def mixed_hessian(c: SmoothCost, x, y, max_cond: float = MAX_COND, return_cond: bool = False):
    """Matrix ``H[i, j] = ∂²c/∂x_i∂y_j``; raises DegeneracyError when ill-conditioned."""
    c = _require_smooth(c)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    eye = np.eye(c.dim)
    H = np.empty((c.dim, c.dim))
    for i in range(c.dim):
        for j in range(c.dim):
            H[i, j] = _mixed(c, x, y, eye[i], eye[j], 1, 1, c.h2, c.h2)
    cond = float(np.linalg.cond(H))
    if not cond < max_cond:
        raise DegeneracyError(f"mixed Hessian is degenerate (condition number {cond:.3g})")
    return (H, cond) if return_cond else H


def mtw_tensor(c: SmoothCost, x, y, xi, eta, require_unit: bool = True) -> MtwSample:
    """Finite-difference MTW tensor S(ξ, η) and the pairing A = ξᵀ H η."""
    c = _require_smooth(c)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xi = np.asarray(xi, dtype=float)
    eta = np.asarray(eta, dtype=float)
    if require_unit and not (abs(np.linalg.norm(xi) - 1) < 1e-9 and abs(np.linalg.norm(eta) - 1) < 1e-9):
        raise ValueError("directions must be unit vectors")
    H = mixed_hessian(c, x, y)
    eye = np.eye(c.dim)
    a_vec = np.array([_mixed(c, x, y, xi, eye[m], 2, 1, c.h3, c.h3) for m in range(c.dim)])
    b_vec = np.array([_mixed(c, x, y, eye[r], eta, 1, 2, c.h3, c.h3) for r in range(c.dim)])
    d4 = _mixed(c, x, y, xi, eta, 2, 2, c.h4, c.h4)
    S = float(a_vec @ np.linalg.solve(H, b_vec) - d4)
    A = float(xi @ H @ eta)
    return MtwSample(x, y, xi, eta, S, A)


@dataclass(frozen=True)
class ScanSummary:
    n_samples: int
    min_S: float
    witness: MtwSample
    n_orthogonal: int
    min_S_orthogonal: float
    witness_orthogonal: MtwSample | None
    classification: str
    seed: int
    fd_tol: float = FD_TOL

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "min_S": self.min_S,
            "witness": self.witness,
            "n_orthogonal": self.n_orthogonal,
            "min_S_orthogonal": self.min_S_orthogonal,
            "witness_orthogonal": self.witness_orthogonal,
            "classification": self.classification,
            "seed": self.seed,
            "fd_tol": self.fd_tol,
        }


def _unit(rng, n):
    v = rng.standard_normal(n)
    return v / np.linalg.norm(v)


def classify(min_S: float, min_S_orth: float, fd_tol: float = FD_TOL) -> str:
    if min_S >= -fd_tol:
        return "nncc-consistent"
    if min_S_orth >= -fd_tol:
        return "mtw-only-consistent"
    return "neither"


def nncc_scan(
    c: SmoothCost,
    region: Callable[[np.random.Generator], tuple[np.ndarray, np.ndarray]],
    n_samples: int,
    seed: int,
    fd_tol: float = FD_TOL,
    orth_tol: float = ORTH_TOL,
) -> ScanSummary:
    """Sample S over ``region`` and classify the cost.

    Every other sample has η chosen in the kernel of ξᵀH so that the
    MTW-only condition (S >= 0 when A = 0) is probed as well as the full one.
    """
    c = _require_smooth(c)
    rng = np.random.default_rng(seed)
    worst = None
    worst_orth = None
    n_orth = 0
    for k in range(n_samples):
        x, y = region(rng)
        xi = _unit(rng, c.dim)
        eta = _unit(rng, c.dim)
        if k % 2 == 1:
            w = mixed_hessian(c, x, y).T @ xi
            eta = eta - (eta @ w) / (w @ w) * w
            eta = eta / np.linalg.norm(eta)
        sample = mtw_tensor(c, x, y, xi, eta)
        if worst is None or sample.S < worst.S:
            worst = sample
        if abs(sample.A) <= orth_tol:
            n_orth += 1
            if worst_orth is None or sample.S < worst_orth.S:
                worst_orth = sample
    if worst is None:
        raise ValueError("n_samples must be positive")
    min_orth = worst_orth.S if worst_orth is not None else math.inf
    return ScanSummary(
        n_samples=n_samples,
        min_S=worst.S,
        witness=worst,
        n_orthogonal=n_orth,
        min_S_orthogonal=min_orth,
        witness_orthogonal=worst_orth,
        classification=classify(worst.S, min_orth, fd_tol),
        seed=seed,
        fd_tol=fd_tol,
    )


# -- c-segment equation ----------------------------------------------------------


def _newton(c: SmoothCost, x_start, ybar, q, tol: float, max_iter: int):
    x = np.array(x_start, dtype=float)
    try:
        r = grad_y(c, x, ybar) - q
    except DomainError:
        return None
    for _ in range(max_iter):
        nr = float(np.linalg.norm(r))
        if nr <= tol:
            return x
        try:
            J = mixed_hessian(c, x, ybar).T
        except (DegeneracyError, DomainError):
            return None
        dx = np.linalg.solve(J, -r)
        step = 1.0
        while step > 1e-6:
            trial = x + step * dx
            try:
                rt = grad_y(c, trial, ybar) - q
            except DomainError:
                step *= 0.5
                continue
            if np.linalg.norm(rt) < nr or np.linalg.norm(rt) <= tol:
                x, r = trial, rt
                break
            step *= 0.5
        else:
            return None
    return x if np.linalg.norm(r) <= tol else None


@dataclass
class _Continuation:
    c: SmoothCost
    ybar: np.ndarray
    q0: np.ndarray
    q1: np.ndarray
    tol: float
    max_iter: int
    max_depth: int
    nodes: dict = field(default_factory=dict)

    def target(self, s: float) -> np.ndarray:
        return (1.0 - s) * self.q0 + s * self.q1

    def solve_from(self, s_from: float, x_from, s_to: float, depth: int = 0):
        x = _newton(self.c, x_from, self.ybar, self.target(s_to), self.tol, self.max_iter)
        if x is not None:
            return x
        if depth >= self.max_depth:
            raise ContinuationError(f"Newton failed between s = {s_from} and s = {s_to}", last_good_s=s_from)
        mid = 0.5 * (s_from + s_to)
        x_mid = self.solve_from(s_from, x_from, mid, depth + 1)
        return self.solve_from(mid, x_mid, s_to, depth + 1)

    def at(self, s: float):
        if s in self.nodes:
            return self.nodes[s]
        keys = np.array(sorted(self.nodes))
        near = float(keys[np.argmin(np.abs(keys - s))])
        x = self.solve_from(near, self.nodes[near], s)
        self.nodes[s] = x
        return x


def c_segment_solve(
    c: SmoothCost,
    x0,
    x1,
    y_bar,
    s_grid=None,
    tol: float = 1e-10,
    max_iter: int = 50,
    max_depth: int = 6,
    endpoint_tol: float = 1e-8,
) -> SegmentPath:
    """Solve ∇_y c(x(s), ybar) = (1-s) ∇_y c(x0, ybar) + s ∇_y c(x1, ybar).

    Newton continuation over ``s_grid`` (65 nodes by default), bisecting a
    failed step up to ``max_depth`` times.  Values at other ``s`` are solved
    on demand from the nearest node.  The solve is carried through s = 1 and
    must land on ``x1``; ``info`` records that endpoint error.
    """
    c = _require_smooth(c)
    x0 = np.asarray(x0, dtype=float)
    x1 = np.asarray(x1, dtype=float)
    ybar = np.asarray(y_bar, dtype=float)
    grid = uniform_grid(65) if s_grid is None else tuple(float(s) for s in s_grid)
    q0 = grad_y(c, x0, ybar)
    q1 = grad_y(c, x1, ybar)
    cont = _Continuation(c, ybar, q0, q1, tol, max_iter, max_depth)
    cont.nodes[0.0] = x0.copy()
    prev_s, prev_x = 0.0, x0
    for s in grid:
        if s == 0.0:
            continue
        x = cont.solve_from(prev_s, prev_x, s)
        cont.nodes[s] = x
        prev_s, prev_x = s, x
    end_err = float(np.linalg.norm(cont.nodes.get(1.0, x1) - x1))
    if end_err > endpoint_tol:
        raise ContinuationError(f"continuation ends {end_err:.3g} away from x1", last_good_s=prev_s)
    cont.nodes[1.0] = x1.copy()
    seg = SegmentPath(ybar, x0, x1, cont.at, name=f"c-segment of {c.name}")
    seg.info.update(endpoint_error=end_err, n_nodes=len(grid))
    return seg


def auto_csegment_check(seg: SegmentPath, c, s_grid=None) -> dict:
    """Largest residual of the c-segment equation along ``seg``."""
    c = _require_smooth(c)
    grid = uniform_grid(33) if s_grid is None else tuple(s_grid)
    ybar = np.asarray(seg.base_y, dtype=float)
    q0 = grad_y(c, seg.x0, ybar)
    q1 = grad_y(c, seg.x1, ybar)
    residuals = []
    for s in grid:
        g = grad_y(c, seg.at(s), ybar)
        residuals.append(float(np.linalg.norm(g - ((1 - s) * q0 + s * q1))))
    k = int(np.argmax(residuals))
    return {"max_residual": residuals[k], "s": grid[k], "residuals": residuals}
