import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from crosscurve.core import VerifierConfig, nncc_check
from crosscurve.families import sphere_family
from crosscurve.reporting import dumps, to_jsonable


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_floats_round_trip_exactly(x):
    assert float(json.loads(dumps({"x": x}))["x"]) == x


def test_special_values_and_types():
    doc = json.loads(dumps({"b": [np.inf, -np.inf], "a": np.arange(3), "f": Fraction(1, 4), "t": np.bool_(True)}))
    assert doc == {"a": [0, 1, 2], "b": ["+inf", "-inf"], "f": 0.25, "t": True}
    with pytest.raises(TypeError):
        dumps({"x": object()})


def test_keys_are_sorted():
    text = dumps({"b": 1, "a": {"d": 2, "c": 3}})
    assert text.index('"a"') < text.index('"b"') and text.index('"c"') < text.index('"d"')
    assert text.endswith("}\n")


def test_reports_are_reproducible():
    fam = sphere_family(2)

    def run():
        rng = np.random.default_rng(77)
        seg = fam.random_segment(rng)
        return dumps(nncc_check(seg, fam.cost, VerifierConfig(n_y=16, seed=78)))

    assert run() == run()
    assert to_jsonable(np.float64(2.5)) == 2.5
