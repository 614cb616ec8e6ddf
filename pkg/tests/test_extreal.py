import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crosscurve.extreal import INF, NEG_INF, UNDEFINED, add, arr_combo, arr_sub, is_finite, le, neg, resolve, scale, sub

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
ext = st.one_of(finite, st.just(INF), st.just(NEG_INF))


@given(finite, finite)
def test_finite_sums_are_ordinary(a, b):
    assert add(a, b) == a + b
    assert sub(a, b) == a - b


@given(st.one_of(finite, st.just(INF)))
def test_plus_inf_absorbs(a):
    assert add(a, INF) == INF
    assert add(INF, a) == INF


@given(st.one_of(finite, st.just(NEG_INF)))
def test_minus_inf_absorbs(a):
    assert add(a, NEG_INF) == NEG_INF


@pytest.mark.parametrize(
    "a, b, op",
    [(INF, NEG_INF, add), (NEG_INF, INF, add), (INF, INF, sub), (NEG_INF, NEG_INF, sub)],
)
def test_undefined_combinations(a, b, op):
    assert op(a, b) is UNDEFINED


@given(ext, ext)
def test_add_is_commutative(a, b):
    r1, r2 = add(a, b), add(b, a)
    assert (r1 is UNDEFINED and r2 is UNDEFINED) or r1 == r2


def test_resolve_rules():
    assert resolve(UNDEFINED, INF) == INF
    assert resolve(UNDEFINED, NEG_INF) == NEG_INF
    assert resolve(3.0, INF) == 3.0
    with pytest.raises(ValueError):
        resolve(UNDEFINED, 0.0)


def test_undefined_has_no_truth_value():
    with pytest.raises(TypeError):
        bool(UNDEFINED)
    with pytest.raises(ValueError):
        add(UNDEFINED, 1.0)


def test_nan_is_rejected():
    with pytest.raises(ValueError):
        add(math.nan, 1.0)


def test_fractions_stay_exact():
    assert add(Fraction(1, 3), Fraction(1, 6)) == Fraction(1, 2)
    assert scale(Fraction(1, 2), Fraction(1, 3)) == Fraction(1, 6)
    assert is_finite(Fraction(7, 2))
    assert neg(Fraction(1, 2)) == Fraction(-1, 2)


def test_scale_keeps_infinities():
    assert scale(0.25, INF) == INF
    assert scale(0.25, NEG_INF) == NEG_INF
    with pytest.raises(ValueError):
        scale(0.0, 1.0)


@given(ext, ext)
def test_le_is_total(a, b):
    assert le(a, b) or le(b, a)


@given(st.lists(ext, min_size=1, max_size=8), st.lists(ext, min_size=1, max_size=8))
def test_vectorized_sub_matches_scalar(xs, ys):
    n = min(len(xs), len(ys))
    a, b = np.array(xs[:n]), np.array(ys[:n])
    out = arr_sub(a, b, undefined=INF)
    for k in range(n):
        assert out[k] == resolve(sub(a[k], b[k]), INF)


@given(st.lists(ext, min_size=1, max_size=8), st.lists(ext, min_size=1, max_size=8), st.floats(0.01, 0.99))
def test_vectorized_combo_matches_scalar(xs, ys, s):
    n = min(len(xs), len(ys))
    a, b = np.array(xs[:n]), np.array(ys[:n])
    out = arr_combo(a, b, s, undefined=NEG_INF)
    for k in range(n):
        expected = resolve(add(scale(1 - s, a[k]), scale(s, b[k])), NEG_INF)
        assert out[k] == pytest.approx(expected)
