import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import brute_force_ot, random_ot_instance

from crosscurve.core import VerifierConfig
from crosscurve.errors import InfeasibleError, OptimalityError
from crosscurve.families import hilbert_family, linear_segment, monge_family, sphere_family
from crosscurve.transport import (
    CE_TRIPLES,
    CE_X0,
    CE_X1,
    CE_Y,
    CE_YBAR,
    Coupling,
    DiscreteMeasure,
    ThreePlan,
    ce_curve,
    counterexample_lmp,
    glue,
    glue_northwest,
    lift_family,
    measure_sampler,
    lifted_segment,
    ot_solve,
    random_measure,
    transport_cost,
    wasserstein_nncc_check,
)


def test_ot_matches_brute_force():
    rng = np.random.default_rng(0)
    for _ in range(200):
        C, a, b = random_ot_instance(rng)
        res = ot_solve(C, a, b)
        assert res.value == pytest.approx(brute_force_ot(C, a, b), abs=1e-10)
        assert res.min_reduced_cost >= -1e-10
        assert res.dual_value == pytest.approx(res.value, abs=1e-9)


@given(st.integers(0, 2**31 - 1), st.integers(2, 7), st.integers(2, 7))
def test_ot_duality_on_larger_instances(seed, n, m):
    rng = np.random.default_rng(seed)
    C = rng.uniform(-1, 3, size=(n, m))
    a, b = rng.dirichlet(np.ones(n)), rng.dirichlet(np.ones(m))
    res = ot_solve(C, a, b)
    Coupling(res.coupling.plan, a, b)
    assert res.dual_value == pytest.approx(res.value, abs=1e-9)
    assert res.min_reduced_cost >= -1e-10
    assert np.all(res.u[:, None] + res.v[None, :] <= C + 1e-9)


def test_ot_trivial_examples():
    fam = hilbert_family(2)
    mu = random_measure(4, seed=3)
    plan, value = ot_solve(fam.cost, mu, mu)
    assert value == pytest.approx(0.0, abs=1e-14)
    np.testing.assert_allclose(plan.plan, np.diag(mu.weights), atol=1e-14)
    _, v = ot_solve(np.array([[0.0, 1.0], [1.0, 0.0]]), [0.5, 0.5], [0.5, 0.5])
    assert v == 0.0


def test_ot_with_infinite_costs():
    C = np.array([[0.0, math.inf], [math.inf, 1.0]])
    _, v = ot_solve(C, [0.5, 0.5], [0.5, 0.5])
    assert v == pytest.approx(0.5)
    with pytest.raises(InfeasibleError):
        ot_solve(np.array([[math.inf, 0.0], [math.inf, 0.0]]), [0.5, 0.5], [0.5, 0.5])


def test_ot_input_validation():
    with pytest.raises(ValueError):
        ot_solve(np.zeros((2, 2)), [0.5, 0.5], [1.0])
    with pytest.raises(ValueError):
        ot_solve(np.zeros((1, 1)), [1.0], [2.0])


def test_measure_construction():
    m = DiscreteMeasure.make([[0, 0], [1e-14, 0], [1, 1], [2, 2]], [0.25, 0.25, 0.5, 0.0])
    assert len(m) == 2
    np.testing.assert_allclose(m.weights, [0.5, 0.5])
    with pytest.raises(ValueError):
        DiscreteMeasure(np.zeros((2, 2)), np.array([0.5, 0.6]))
    assert len(DiscreteMeasure.dirac([1.0, 2.0])) == 1


def test_random_measure():
    assert len(random_measure(1, seed=4)) == 1
    a, b = random_measure(5, seed=9), random_measure(5, seed=9)
    np.testing.assert_array_equal(a.support, b.support)
    np.testing.assert_array_equal(a.weights, b.weights)
    for seed in range(1000):
        assert abs(random_measure(4, seed=seed).weights.sum() - 1.0) <= 1e-12
    with pytest.raises(ValueError):
        random_measure(0)


def _plans(seed):
    fam = hilbert_family(2)
    mu0, mu1, nu = (random_measure(k, seed=seed + k) for k in (3, 4, 5))
    return fam, mu0, mu1, nu, ot_solve(fam.cost, mu0, nu).coupling, ot_solve(fam.cost, mu1, nu).coupling


@pytest.mark.parametrize("glue_fn", [glue, glue_northwest])
def test_glue_projections(glue_fn):
    _, mu0, mu1, nu, p0, p1 = _plans(10)
    g = glue_fn(p0, p1)
    np.testing.assert_allclose(g.pi0, p0.plan, atol=1e-12)
    np.testing.assert_allclose(g.pi1, p1.plan, atol=1e-12)
    assert g.gamma.sum() == pytest.approx(1.0, abs=1e-12)
    assert g.gamma.min() >= 0.0


def test_glue_special_cases():
    mu0, mu1 = np.array([0.3, 0.7]), np.array([0.6, 0.4])
    g = glue(mu0[:, None], mu1[:, None])
    np.testing.assert_allclose(g.gamma[:, :, 0], np.outer(mu0, mu1))
    d = np.diag([0.2, 0.8])
    g = glue(d, d)
    assert g.gamma[0, 0, 0] == pytest.approx(0.2) and g.gamma[1, 1, 1] == pytest.approx(0.8)
    assert np.count_nonzero(g.gamma) == 2
    with pytest.raises(ValueError):
        glue(np.array([[0.5], [0.5]]), np.array([[0.3, 0.7]]))


def test_generalized_geodesic_with_dirac_target():
    fam = hilbert_family(2)
    mu0, mu1 = random_measure(2, seed=1), random_measure(3, seed=2)
    nu = DiscreteMeasure.dirac([0.0, 0.0])
    lift = lift_family(mu0, mu1, nu, fam)
    s = 0.4
    expected = DiscreteMeasure.make(
        [(1 - s) * x + s * z for x in mu0.support for z in mu1.support],
        [w0 * w1 for w0 in mu0.weights for w1 in mu1.weights],
    )
    got = lift.segment.at(s)
    order_e, order_g = np.lexsort(expected.support.T), np.lexsort(got.support.T)
    np.testing.assert_allclose(got.support[order_g], expected.support[order_e], atol=1e-12)
    np.testing.assert_allclose(got.weights[order_g], expected.weights[order_e], atol=1e-12)


def test_equal_endpoints():
    fam = hilbert_family(2)
    mu, nu = random_measure(4, seed=5), random_measure(3, seed=6)
    lift = lift_family(mu, mu, nu, fam, glue_northwest)
    m = lift.segment.at(0.5)
    order_a, order_b = np.lexsort(m.support.T), np.lexsort(mu.support.T)
    np.testing.assert_allclose(m.support[order_a], mu.support[order_b], atol=1e-12)
    np.testing.assert_allclose(m.weights[order_a], mu.weights[order_b], atol=1e-12)
    # with a Dirac target every source atom shares the target, so the
    # independent glue mixes distinct atoms and the path leaves mu
    lift = lift_family(mu, mu, DiscreteMeasure.dirac([0.0, 0.0]), fam, glue)
    assert len(lift.segment.at(0.5)) > len(mu)


def test_lifted_plan_is_optimal():
    for base, seed in ((hilbert_family(2), 20), (monge_family(), 30)):
        mu0, mu1, nu = (random_measure(4, seed=seed + k) for k in range(3))
        lift = lift_family(mu0, mu1, nu, base)
        assert max(lift.optimality_residual(s) for s in (0.1, 0.5, 0.9)) <= 1e-8


def test_non_optimal_endpoint_plans_are_rejected():
    fam = hilbert_family(2)
    mu0 = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
    nu = DiscreteMeasure(np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([0.5, 0.5]))
    swap = np.array([[0.0, 0.5], [0.5, 0.0]])
    with pytest.raises(OptimalityError):
        lifted_segment(glue(swap, swap), fam.segment, mu0, mu0, nu, fam.cost)
    with pytest.raises(ValueError):
        lifted_segment(ThreePlan(np.ones((1, 1, 1))), fam.segment, mu0, mu0, nu)


@pytest.mark.parametrize("name", ["hilbert", "sphere", "monge"])
def test_wasserstein_check_passes(name):
    fam = {"hilbert": hilbert_family(2), "sphere": sphere_family(2), "monge": monge_family()}[name]
    rng = np.random.default_rng(40)
    sample = measure_sampler(fam, (3, 4))
    mu0, mu1, nu = sample(rng, 3)
    cfg = VerifierConfig(n_y=6, seed=1, tol=1e-8 if name != "sphere" else 1e-6)
    report, residual = wasserstein_nncc_check(mu0, mu1, nu, fam, cfg)
    assert report.passed
    assert residual <= 1e-8


def test_transport_cost_space():
    T = transport_cost(hilbert_family(2).cost)
    mu = random_measure(3, seed=2)
    assert T.eval(mu, mu) == pytest.approx(0.0, abs=1e-14)


def test_counterexample_curves():
    assert ce_curve(1, 0.25) == pytest.approx(np.array([-1.2, 0.1]), abs=1e-15)
    for k, (i, j) in CE_TRIPLES.items():
        np.testing.assert_allclose(ce_curve(k, 0.0), CE_X0[i], atol=1e-15)
        np.testing.assert_allclose(ce_curve(k, 1.0), CE_X1[j], atol=1e-15)
    with pytest.raises(ValueError):
        ce_curve(5, 0.5)


def test_counterexample_violates_the_maximum_principle():
    res = counterexample_lmp(n_s=101)
    assert max(abs(res.f_mu1[0]), abs(res.f_mu1[-1]), abs(res.f_mu2[0]), abs(res.f_mu2[-1])) <= 1e-12
    assert res.f_mu1[50] > 0 and res.f_mu2[50] > 0
    assert res.min_max > 1e-3
    assert not res.report.passed
    assert len(res.rows("mu1")) == 101 and res.rows("3")[0][0] == 0.0
    assert CE_Y[0] == -CE_YBAR[0]
