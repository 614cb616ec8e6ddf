"""c-transforms and c-subdifferentials on finite cost tables.

Entries are extended reals: ``int``/``Fraction`` for exact rational work, or
``float`` with ``±inf``.  Equalities are exact when every finite input is
rational and use an absolute tolerance otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np

from .errors import PreconditionError
from .extreal import INF, NEG_INF, add, is_finite, resolve, scale, sub

FLOAT_TOL = 1e-10


def _is_exact(v) -> bool:
    return isinstance(v, Rational) or (isinstance(v, float) and math.isinf(v))


@dataclass(frozen=True)
class FiniteCostTable:
    """An ``nx x ny`` table of extended reals."""

    table: tuple[tuple, ...]

    def __init__(self, table):
        rows = tuple(tuple(row) for row in table)
        if rows and len({len(r) for r in rows}) != 1:
            raise ValueError("ragged cost table")
        for row in rows:
            for v in row:
                if v is None or (isinstance(v, float) and math.isnan(v)):
                    raise ValueError("cost table entries must be defined extended reals")
        object.__setattr__(self, "table", rows)

    @property
    def nx(self) -> int:
        return len(self.table)

    @property
    def ny(self) -> int:
        return len(self.table[0]) if self.table else 0

    def __getitem__(self, idx):
        i, j = idx
        return self.table[i][j]

    @property
    def T(self) -> "FiniteCostTable":
        return FiniteCostTable(list(zip(*self.table)))

    @property
    def exact(self) -> bool:
        return all(_is_exact(v) for row in self.table for v in row)

    @classmethod
    def from_points(cls, xs, ys, cost) -> "FiniteCostTable":
        return cls([[cost(x, y) for y in ys] for x in xs])


def _equal(a, b, exact: bool, tol: float) -> bool:
    if not (is_finite(a) and is_finite(b)):
        return a == b
    if exact:
        return a == b
    return abs(a - b) <= tol


def c_transform(phi: Sequence, c: FiniteCostTable) -> list:
    """φ^c(x) = min_y c(x, y) - φ(y), with inf - inf resolved to +inf.

    ``phi`` is indexed by the columns of ``c``; the result by its rows.
    Apply to ``c.T`` to transform a function of x back to a function of y.
    """
    if len(phi) != c.ny:
        raise ValueError("phi must have one entry per column")
    out = []
    for i in range(c.nx):
        best = INF
        for j in range(c.ny):
            v = resolve(sub(c[i, j], phi[j]), INF)
            if v < best:
                best = v
        out.append(best)
    return out


def c_subdifferential(phi: Sequence, c: FiniteCostTable, y_index: int, tol: float = FLOAT_TOL) -> set[int]:
    """Rows x with c(x, ybar) finite and φ^c(x) + φ(ybar) = c(x, ybar)."""
    p = phi[y_index]
    if not is_finite(p):
        return set()
    exact = c.exact and all(_is_exact(v) for v in phi)
    pc = c_transform(phi, c)
    out = set()
    for i in range(c.nx):
        cij = c[i, y_index]
        if not is_finite(cij) or not is_finite(pc[i]):
            continue
        if _equal(pc[i] + p, cij, exact, tol):
            out.add(i)
    return out


def phi_s(phi0: Sequence, phi1: Sequence, s) -> list:
    """(1-s)φ0 + sφ1 with (+inf) + (-inf) resolved to -inf."""
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return [resolve(add(scale(1 - s, a), scale(s, b)), NEG_INF) for a, b in zip(phi0, phi1)]


def chord_statement(c: FiniteCostTable, x0: int, x1: int, xt: int, yb: int, s, tol: float = FLOAT_TOL) -> bool:
    """Statement (i): c(xt, ybar) finite and the chord inequality for every y."""
    if not is_finite(c[xt, yb]):
        return False
    exact = c.exact and isinstance(s, Rational)
    for y in range(c.ny):
        lhs = sub(c[xt, yb], c[xt, y])
        a = sub(c[x0, yb], c[x0, y])
        b = sub(c[x1, yb], c[x1, y])
        rhs = resolve(add(scale(1 - s, a), scale(s, b)), INF)
        if lhs <= rhs:
            continue
        if not exact and is_finite(lhs) and is_finite(rhs) and lhs - rhs <= tol:
            continue
        return False
    return True


def _function_family(c: FiniteCostTable, x0: int, x1: int, yb: int, n_random: int, seed: int):
    """Canonical pair φ_i = c(x_i, ·), then random perturbations of it."""
    yield [c[x0, j] for j in range(c.ny)], [c[x1, j] for j in range(c.ny)]
    rng = np.random.default_rng(seed)
    exact = c.exact

    def num(v):
        return Fraction(int(v)) if exact else float(v)

    for _ in range(n_random):
        pair = []
        for xi in (x0, x1):
            mode = rng.integers(3)
            phi = []
            for j in range(c.ny):
                if mode == 0:
                    v = sub(c[xi, j], num(rng.integers(0, 4)))
                    v = resolve(v, NEG_INF)
                elif mode == 1:
                    v = num(rng.integers(-4, 5))
                else:
                    v = c[xi, j] if rng.random() < 0.7 else NEG_INF
                if j == yb and mode != 1:
                    v = c[xi, j]
                if rng.random() < 0.1 and j != yb:
                    v = NEG_INF if rng.random() < 0.5 else INF
                phi.append(v)
            pair.append(phi)
        yield pair[0], pair[1]


def fkm_pointwise_check(
    c: FiniteCostTable,
    x0: int,
    x1: int,
    x_tilde: int,
    y_bar: int,
    s,
    n_random: int = 64,
    seed: int = 0,
    tol: float = FLOAT_TOL,
) -> tuple[bool, bool]:
    """Return (chord statement, contact-set implication) for one instance.

    The implication is checked on the canonical pair and ``n_random``
    perturbed pairs; pairs that do not satisfy the premise are vacuous.
    """
    if not (is_finite(c[x0, y_bar]) and is_finite(c[x1, y_bar])):
        raise PreconditionError("c(x0, ybar) and c(x1, ybar) must be finite")
    chord = chord_statement(c, x0, x1, x_tilde, y_bar, s, tol)
    implication = True
    for phi0, phi1 in _function_family(c, x0, x1, y_bar, n_random, seed):
        if x0 not in c_subdifferential(phi0, c, y_bar, tol):
            continue
        if x1 not in c_subdifferential(phi1, c, y_bar, tol):
            continue
        if x_tilde not in c_subdifferential(phi_s(phi0, phi1, s), c, y_bar, tol):
            implication = False
            break
    return chord, implication
