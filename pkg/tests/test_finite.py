from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crosscurve.errors import PreconditionError
from crosscurve.extreal import INF, NEG_INF
from crosscurve.finite import FiniteCostTable, c_subdifferential, c_transform, fkm_pointwise_check, phi_s


def _brute_transform(phi, table):
    out = []
    for row in table:
        vals = []
        for cij, p in zip(row, phi):
            if cij == p and cij in (INF, NEG_INF):
                vals.append(INF)
            else:
                vals.append(cij - p)
        out.append(min(vals))
    return out


def _rational_table(rng, nx, ny, p_inf=0.15):
    rows = []
    for _ in range(nx):
        row = []
        for _ in range(ny):
            row.append(INF if rng.random() < p_inf else Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 4))))
        rows.append(row)
    return FiniteCostTable(rows)


def _rational_phi(rng, n, p_inf=0.1):
    out = []
    for _ in range(n):
        u = rng.random()
        if u < p_inf / 2:
            out.append(INF)
        elif u < p_inf:
            out.append(NEG_INF)
        else:
            out.append(Fraction(int(rng.integers(-6, 7)), int(rng.integers(1, 4))))
    return out


def test_zero_potential_gives_row_minima():
    c = FiniteCostTable([[3, 1, 2], [0, 5, 4]])
    assert c_transform([0, 0, 0], c) == [1, 0]


def test_infinite_potentials():
    c = FiniteCostTable([[3, 1], [0, 5]])
    assert c_transform([NEG_INF, NEG_INF], c) == [INF, INF]
    assert c_transform([INF, INF], c) == [NEG_INF, NEG_INF]
    # inf - inf inside the minimum resolves to +inf
    assert c_transform([INF, INF], FiniteCostTable([[INF, INF]])) == [INF]


def test_two_by_two_fixture():
    c = FiniteCostTable([[0, 1], [1, 0]])
    phi = [0, -1]
    assert c_transform(phi, c) == [0, 1]
    assert c_transform(phi, c) == _brute_transform(phi, c.table)


def test_ragged_and_nan_tables_are_rejected():
    with pytest.raises(ValueError):
        FiniteCostTable([[0, 1], [1]])
    with pytest.raises(ValueError):
        FiniteCostTable([[float("nan")]])
    with pytest.raises(ValueError):
        c_transform([0], FiniteCostTable([[0, 1]]))


@given(st.integers(0, 2**31 - 1))
def test_triple_transform_is_exact_on_rationals(seed):
    rng = np.random.default_rng(seed)
    c = _rational_table(rng, 4, 4)
    phi = _rational_phi(rng, 4)
    pc = c_transform(phi, c)
    pcc = c_transform(pc, c.T)
    pccc = c_transform(pcc, c)
    assert pccc == pc
    assert pc == _brute_transform(phi, c.table)
    assert all(a >= b for a, b in zip(pcc, phi))


@given(st.integers(0, 2**31 - 1))
def test_transform_reverses_order(seed):
    rng = np.random.default_rng(seed)
    c = _rational_table(rng, 4, 5)
    phi = _rational_phi(rng, 5, p_inf=0.0)
    psi = [p + Fraction(int(rng.integers(0, 3))) for p in phi]
    assert all(a >= b for a, b in zip(c_transform(phi, c), c_transform(psi, c)))


def test_subdifferential_rules():
    c = FiniteCostTable([[0, 1], [1, 0], [INF, 2]])
    assert c_subdifferential([INF, 0], c, 0) == set()
    assert c_subdifferential([0, 0], c, 0) == {0}
    assert c_subdifferential([0, 0], c, 1) == {1, 2}
    # the float path uses an absolute tolerance
    cf = FiniteCostTable([[0.0, 1.0], [1.0, 1e-12]])
    assert c_subdifferential([0.0, 0.0], cf, 1) == {1}


def test_phi_s_resolves_opposite_infinities_down():
    assert phi_s([INF, 1], [NEG_INF, 3], Fraction(1, 2)) == [NEG_INF, 2]
    with pytest.raises(ValueError):
        phi_s([0], [0], 1)


@given(st.integers(0, 2**31 - 1))
def test_fkm_booleans_agree(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 5))
    c = _rational_table(rng, n + 1, n)
    yb = 0
    for i in range(c.nx):
        if c[i, yb] == INF:
            rows = [list(r) for r in c.table]
            rows[i][yb] = Fraction(0)
            c = FiniteCostTable(rows)
    x0, x1, xt = (int(v) for v in rng.integers(0, c.nx, size=3))
    s = Fraction(int(rng.integers(1, 4)), 4)
    chord, implication = fkm_pointwise_check(c, x0, x1, xt, yb, s, n_random=16, seed=seed)
    assert chord == implication


def test_fkm_needs_finite_endpoint_costs():
    c = FiniteCostTable([[INF, 0], [0, 0]])
    with pytest.raises(PreconditionError):
        fkm_pointwise_check(c, 0, 1, 1, 0, Fraction(1, 2))


def test_fkm_on_float_table():
    pts = np.linspace(-1, 1, 5)
    c = FiniteCostTable.from_points(pts, pts, lambda x, y: float((x - y) ** 2))
    chord, implication = fkm_pointwise_check(c, 0, 4, 2, 1, 0.5)
    assert chord and implication
