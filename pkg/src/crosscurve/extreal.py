"""Extended-real arithmetic on R ∪ {-inf, +inf}.

Values are plain Python numbers (``float`` or ``fractions.Fraction``) plus
``math.inf``/``-math.inf``.  Sums like ``(+inf) + (-inf)`` have no value; they
return the :data:`UNDEFINED` marker, and each call site chooses how to resolve
it with :func:`resolve`.  The vectorized helpers at the bottom apply the same
rules to numpy arrays for the samplers in :mod:`crosscurve.core`.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Real

import numpy as np

INF = math.inf
NEG_INF = -math.inf


class _Undefined:
    """Singleton marker for an undefined combination such as inf - inf."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "UNDEFINED"

    def __bool__(self) -> bool:
        raise TypeError("UNDEFINED has no truth value; resolve it first")


UNDEFINED = _Undefined()


def is_undefined(a) -> bool:
    return a is UNDEFINED


def is_finite(a) -> bool:
    if a is UNDEFINED:
        return False
    if isinstance(a, Fraction):
        return True
    return math.isfinite(a)


def _check(a):
    if a is UNDEFINED:
        raise ValueError("operand is UNDEFINED; resolve it before further arithmetic")
    if not isinstance(a, (Real, np.floating, np.integer)):
        raise TypeError(f"not an extended real: {a!r}")
    if not isinstance(a, Fraction) and math.isnan(a):
        raise ValueError("NaN is not an extended real")


def add(a, b):
    """a + b, or UNDEFINED for (+inf)+(-inf) and (-inf)+(+inf)."""
    _check(a)
    _check(b)
    a_inf = not is_finite(a)
    b_inf = not is_finite(b)
    if a_inf and b_inf and (a > 0) != (b > 0):
        return UNDEFINED
    if a_inf:
        return float(a)
    if b_inf:
        return float(b)
    return a + b


def neg(a):
    _check(a)
    return -a


def sub(a, b):
    """a - b, or UNDEFINED for (+inf)-(+inf) and (-inf)-(-inf)."""
    return add(a, neg(b))


def scale(t, a):
    """t * a for a finite real t > 0 (the only scalings the chord needs)."""
    _check(a)
    if not t > 0:
        raise ValueError("scale factor must be positive")
    if not is_finite(a):
        return float(a)
    return t * a


def resolve(a, rule):
    """Replace UNDEFINED by ``rule`` (``+inf`` or ``-inf``); other values pass through."""
    if rule not in (INF, NEG_INF):
        raise ValueError("resolution rule must be +inf or -inf")
    return rule if a is UNDEFINED else a


def le(a, b) -> bool:
    """Order comparison on defined extended reals."""
    _check(a)
    _check(b)
    return a <= b


# -- vectorized helpers ----------------------------------------------------


def arr_sub(a, b, undefined: float):
    """Elementwise a - b on float arrays with undefined entries resolved to ``undefined``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = a - b
    bad = np.isinf(a) & np.isinf(b) & (np.sign(a) == np.sign(b))
    return np.where(bad, undefined, out)


def arr_combo(a, b, s, undefined: float):
    """Elementwise (1-s)*a + s*b for 0 < s < 1 with undefined sums resolved."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore"):
        out = (1.0 - s) * a + s * b
    bad = np.isinf(a) & np.isinf(b) & (np.sign(a) != np.sign(b))
    return np.where(bad, undefined, out)
