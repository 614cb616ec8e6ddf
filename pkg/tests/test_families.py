import math

import numpy as np
import pytest

from crosscurve.core import VerifierConfig, conv_check, lmp_check, nncc_check, uniform_grid
from crosscurve.errors import CutLocusError, DomainError, PreconditionError
from crosscurve.families import (
    FAMILIES,
    POTENTIALS,
    bregman_family,
    check_metric,
    hilbert_family,
    log_distance_family,
    make_family,
    monge_family,
    random_finite_metric,
    random_sphere_point,
    reverse_bregman_residual,
    semi_geostrophic_family,
    shrink_split,
    soft_threshold_cost_value,
    soft_threshold_family,
    sphere_exp,
    sphere_family,
    sphere_log,
)
from crosscurve.transport import CE_TRIPLES, CE_X0, CE_X1, CE_YBAR, ce_curve

AFFINE = [
    ("hilbert", lambda: hilbert_family(3)),
    ("bregman-forward", lambda: bregman_family(3, "entropy", "forward")),
    ("bregman-reverse", lambda: bregman_family(3, "entropy", "reverse")),
    ("bregman-quadratic-reverse", lambda: bregman_family(2, "quadratic", "reverse")),
    ("semi_geostrophic", lambda: semi_geostrophic_family(2, 1.5)),
]


def test_hilbert_midpoint():
    seg = hilbert_family(2).segment(np.zeros(2), np.array([2.0, 0.0]), np.array([5.0, 5.0]))
    np.testing.assert_array_equal(seg.at(0.5), [1.0, 0.0])


@pytest.mark.parametrize("name, build", AFFINE, ids=[a for a, _ in AFFINE])
def test_affine_families_have_zero_gap(name, build):
    fam = build()
    rng = np.random.default_rng(2024)
    for k in range(4):
        seg = fam.random_segment(rng)
        rep = nncc_check(seg, fam.cost, VerifierConfig(n_y=32, seed=100 + k, tol=1e-10))
        assert abs(rep.max_gap) <= 1e-10, name


@pytest.mark.parametrize("name, build", AFFINE, ids=[a for a, _ in AFFINE])
def test_endpoints_are_bit_exact(name, build):
    fam = build()
    x0, x1, yb = fam.random_triple(np.random.default_rng(5))
    seg = fam.segment(x0, x1, yb)
    assert seg.at(0) is x0 and seg.at(1) is x1


def test_generalized_hilbert_with_maps():
    F = np.exp
    F_inv = np.log
    G = lambda y: y**3  # noqa: E731
    fam = hilbert_family(2, F=F, F_inv=F_inv, G=G)
    rng = np.random.default_rng(8)
    for k in range(3):
        rep = nncc_check(fam.random_segment(rng), fam.cost, VerifierConfig(n_y=32, seed=50 + k, tol=1e-9))
        assert rep.passed


def test_reverse_entropy_is_geometric_interpolation():
    fam = bregman_family(3, "entropy", "reverse")
    pot = POTENTIALS["entropy"]()
    rng = np.random.default_rng(11)
    x0, x1, yb = fam.random_triple(rng)
    seg = fam.segment(x0, x1, yb)
    for s in (0.2, 0.5, 0.9):
        np.testing.assert_allclose(seg.at(s), x0 ** (1 - s) * x1**s, rtol=1e-12)
        assert reverse_bregman_residual(pot, seg, s) <= 1e-12


def test_reverse_quartic_potential_uses_newton():
    fam = bregman_family(2, "quartic", "reverse")
    pot = POTENTIALS["quartic"]()
    seg = fam.random_segment(np.random.default_rng(3))
    for s in (0.3, 0.7):
        assert reverse_bregman_residual(pot, seg, s) <= 1e-10


def test_bregman_rejects_unknown_mode():
    with pytest.raises(ValueError):
        bregman_family(2, "entropy", "sideways")


def test_semi_geostrophic_constant_x_is_linear_in_a():
    fam = semi_geostrophic_family(2, 1.0)
    p0 = np.array([0.3, 0.1, 1.0])
    p1 = np.array([0.3, 0.1, 2.0])
    seg = fam.segment(p0, p1, p0)
    assert seg.at(0.25)[-1] == pytest.approx(1.25)


def test_semi_geostrophic_domain_error():
    fam = semi_geostrophic_family(1, -0.1)
    seg = fam.segment(np.array([-2.0, 0.5]), np.array([2.0, 0.5]), np.array([0.0, 1.0]))
    with pytest.raises(DomainError):
        seg.at(0.5)
    with pytest.raises(ValueError):
        semi_geostrophic_family(1, 0.0)
    with pytest.raises(DomainError):
        fam.cost.eval(np.array([0.0, 1.0]), np.array([0.0, -1.0]))


@pytest.mark.parametrize("kind", ["euclid", "graph", "ultra"])
def test_monge_on_finite_metrics(kind):
    rng = np.random.default_rng(17)
    for _ in range(20):
        n = int(rng.integers(3, 9))
        D = random_finite_metric(n, rng, kind)
        fam = monge_family(D)
        x0, x1, yb = fam.random_triple(rng)
        rep = nncc_check(fam.segment(x0, x1, yb), fam.cost, VerifierConfig(n_y=n, seed=1, tol=1e-12))
        assert rep.passed


def test_monge_interior_is_constant():
    fam = monge_family()
    yb = np.array([0.5, 0.5])
    seg = fam.segment(np.zeros(2), np.ones(2), yb)
    assert all(seg.at(s) is yb for s in (0.1, 0.5, 0.9))


def test_metric_validation():
    with pytest.raises(PreconditionError):
        check_metric([[0, 1, 5], [1, 0, 1], [5, 1, 0]])
    with pytest.raises(PreconditionError):
        monge_family([[0, 1], [2, 0]])


def test_soft_threshold_is_continuous_at_the_knee():
    eps = 0.7
    z = np.array([eps, 0.0])
    assert soft_threshold_cost_value(z, eps) == pytest.approx(eps / 2)
    assert soft_threshold_cost_value(z * (1 + 1e-12), eps) == pytest.approx(eps / 2)


@pytest.mark.parametrize("eps", [0.3, 1.0, 2.5])
def test_soft_threshold_matches_brute_force_infimal_convolution(eps):
    # 1-D oracle: min over split points a of |a| + (z - a)^2 / (2 eps)
    a = np.linspace(-6, 6, 1_200_001)
    for z in np.linspace(-4, 4, 17):
        brute = np.min(np.abs(a) + (z - a) ** 2 / (2 * eps))
        assert soft_threshold_cost_value(np.array([z]), eps) == pytest.approx(brute, abs=1e-9)


def test_shrink_split_is_optimal():
    z = np.array([3.0, 4.0])
    a, b = shrink_split(z, 1.0)
    np.testing.assert_allclose(a + b, z)
    assert np.linalg.norm(a) + b @ b / 2 == pytest.approx(soft_threshold_cost_value(z, 1.0))


def test_soft_threshold_segments_pass():
    fam = soft_threshold_family(2, 0.8)
    rng = np.random.default_rng(21)
    for k in range(10):
        seg = fam.random_segment(rng)
        assert nncc_check(seg, fam.cost, VerifierConfig(n_y=32, seed=k, tol=1e-8)).passed
    with pytest.raises(ValueError):
        soft_threshold_family(2, 0.0)


def test_sphere_exp_log_round_trip():
    rng = np.random.default_rng(31)
    for _ in range(100):
        b, x = random_sphere_point(rng, 2), random_sphere_point(rng, 2)
        np.testing.assert_allclose(sphere_exp(b, sphere_log(b, x)), x, atol=1e-12)


def test_sphere_constant_segment_and_cut_locus():
    fam = sphere_family(2)
    x = np.array([0.0, 0.0, 1.0])
    yb = np.array([1.0, 0.0, 0.0])
    seg = fam.segment(x, x, yb)
    np.testing.assert_allclose(seg.at(0.4), x, atol=1e-12)
    with pytest.raises(CutLocusError):
        fam.segment(x, np.array([0.0, 1.0, 0.0]), -x)


def test_sphere_segments_pass_nncc_and_conv():
    fam = sphere_family(2)
    rng = np.random.default_rng(41)
    for k in range(10):
        seg = fam.random_segment(rng)
        cfg = VerifierConfig(n_y=32, seed=k, tol=1e-8)
        assert nncc_check(seg, fam.cost, cfg).passed
        assert conv_check(seg, fam.cost, cfg.replace(tol=1e-6)).passed


def test_log_distance_cost_values():
    fam = log_distance_family(2)
    assert fam.cost.eval(np.zeros(2), np.array([1.0, 0.0])) == 0.0
    with pytest.raises(DomainError):
        fam.cost.eval(np.zeros(2), np.zeros(2))


@pytest.mark.parametrize("k", sorted(CE_TRIPLES))
def test_log_distance_segments_match_closed_forms(k):
    fam = log_distance_family(2)
    i, j = CE_TRIPLES[k]
    seg = fam.segment(CE_X0[i], CE_X1[j], CE_YBAR)
    for s in (0.25, 0.5, 0.75):
        np.testing.assert_allclose(seg.at(s), ce_curve(k, s), atol=1e-8)
    cfg = VerifierConfig(n_y=64, seed=k, s_grid=uniform_grid(17))
    assert lmp_check(seg, fam.cost, cfg).passed
    assert not nncc_check(seg, fam.cost, cfg).passed


def test_registry_builds_every_family():
    for name in FAMILIES:
        fam = make_family({"family": name})
        assert fam.name == name
    with pytest.raises(KeyError):
        make_family({"family": "torus"})
