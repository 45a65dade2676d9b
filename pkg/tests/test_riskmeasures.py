"""Risk measures: evaluation, axioms, penalties, subgradients, dual sets."""
import math

import numpy as np
import pytest

import hedgekit as hk

from conftest import positive_weights

UNIFORM4 = hk.make_space(np.array([0.25, 0.25, 0.25, 0.25]))
X4 = hk.Rv(np.array([-2.0, -1.0, 0.0, 1.0]))

AXIOM_TOL = 1e-9


# ---------------------------------------------------------------------------
# Evaluation against hand-computed values.
# ---------------------------------------------------------------------------

def test_neg_expectation_eval():
    assert hk.rho_eval(hk.neg_expectation(), X4, UNIFORM4) == pytest.approx(0.5)


def test_entropic_eval_frozen():
    # ENT_1 of a two-pointer taking 0 and -log 3: log((1 + 3)/2) = log 2.
    space = hk.make_space(np.array([0.5, 0.5]))
    x = hk.Rv(np.array([0.0, -math.log(3.0)]))
    got = hk.rho_eval(hk.entropic(1.0), x, space)
    assert got == pytest.approx(math.log(2.0), abs=1e-14)


def test_entropic_eval_is_stable_for_large_positions():
    space = hk.make_space(np.array([0.5, 0.5]))
    x = hk.Rv(np.array([-800.0, 800.0]))
    got = hk.rho_eval(hk.entropic(1.0), x, space)
    # The worst scenario dominates: (1/a) log(0.5 e^{800}) = 800 - log 2.
    assert got == pytest.approx(800.0 - math.log(2.0), rel=1e-13)


def test_expected_shortfall_eval_frozen():
    es = hk.expected_shortfall
    assert hk.rho_eval(es(0.5), X4, UNIFORM4) == pytest.approx(1.5)
    # alpha = 0.3 splits the second atom: (0.25*2 + 0.05*1)/0.3 = 11/6.
    assert hk.rho_eval(es(0.3), X4, UNIFORM4) == pytest.approx(11.0 / 6.0)
    # Full-mass tail average is the plain negative mean.
    assert hk.rho_eval(es(1.0 - 1e-12), X4, UNIFORM4) == pytest.approx(0.5)


def test_expected_shortfall_fractional_atom_non_uniform():
    space = hk.make_space(np.array([0.2, 0.3, 0.5]))
    x = hk.Rv(np.array([-1.0, 0.0, 2.0]))
    got = hk.rho_eval(hk.expected_shortfall(0.35), x, space)
    assert got == pytest.approx(0.2 / 0.35, abs=1e-14)


def test_value_at_risk_eval_and_convexity_flag():
    var = hk.value_at_risk(0.5)
    assert hk.rho_eval(var, X4, UNIFORM4) == pytest.approx(1.0)
    assert not var.is_convex
    assert hk.expected_shortfall(0.5).is_convex


def test_level_validation():
    for bad in (0.0, 1.0, -0.2, 1.3):
        with pytest.raises(hk.LevelOutOfRange):
            hk.expected_shortfall(bad)
        with pytest.raises(hk.LevelOutOfRange):
            hk.value_at_risk(bad)
    with pytest.raises(hk.LevelOutOfRange):
        hk.entropic(0.0)
    with pytest.raises(hk.LevelOutOfRange):
        hk.entropic(-1.0)


def test_var_rejected_by_duality_operations(rng):
    var = hk.value_at_risk(0.3)
    q = hk.Measure(np.ones(4))
    with pytest.raises(hk.NonConvexMeasure):
        hk.rho_penalty(var, q, UNIFORM4)
    with pytest.raises(hk.NonConvexMeasure):
        hk.rho_subgradient(var, X4, UNIFORM4)
    with pytest.raises(hk.NonConvexMeasure):
        hk.dual_set(var)


# ---------------------------------------------------------------------------
# Axioms on random draws (the acceptance suite runs the large version).
# ---------------------------------------------------------------------------

def _measures(rng):
    return [
        hk.neg_expectation(),
        hk.entropic(float(rng.uniform(0.2, 3.0))),
        hk.expected_shortfall(float(rng.uniform(0.05, 0.95))),
    ]


def test_axioms_spot_check(rng):
    for _ in range(150):
        k = int(rng.integers(2, 17))
        space = hk.make_space(positive_weights(rng, k))
        x = hk.Rv(rng.normal(scale=2.0, size=k))
        y = hk.Rv(x.values + rng.uniform(0.0, 1.5, size=k))  # y >= x
        c = float(rng.normal())
        lam = float(rng.uniform())
        for rho in _measures(rng):
            rx = hk.rho_eval(rho, x, space)
            ry = hk.rho_eval(rho, y, space)
            assert ry <= rx + AXIOM_TOL, f"monotonicity fails for {rho.kind}"
            shifted = hk.rho_eval(rho, hk.Rv(x.values + c), space)
            assert shifted == pytest.approx(rx - c, abs=AXIOM_TOL)
            mix = hk.Rv(lam * x.values + (1.0 - lam) * y.values)
            bound = lam * rx + (1.0 - lam) * ry
            assert hk.rho_eval(rho, mix, space) <= bound + AXIOM_TOL


def test_es_positive_homogeneity(rng):
    for _ in range(80):
        k = int(rng.integers(2, 17))
        space = hk.make_space(positive_weights(rng, k))
        x = hk.Rv(rng.normal(scale=2.0, size=k))
        rho = hk.expected_shortfall(float(rng.uniform(0.05, 0.95)))
        t = float(rng.uniform(0.0, 4.0))
        got = hk.rho_eval(rho, hk.Rv(t * x.values), space)
        assert got == pytest.approx(t * hk.rho_eval(rho, x, space), abs=AXIOM_TOL)


def test_normalization():
    zero = hk.Rv.constant(0.0, 4)
    for rho in (hk.neg_expectation(), hk.entropic(1.3), hk.expected_shortfall(0.4)):
        assert hk.rho_eval(rho, zero, UNIFORM4) == pytest.approx(0.0, abs=1e-15)


# ---------------------------------------------------------------------------
# Subgradients.
# ---------------------------------------------------------------------------

def test_subgradient_frozen_densities():
    q = hk.rho_subgradient(hk.expected_shortfall(0.5), X4, UNIFORM4)
    assert q.density == pytest.approx([2.0, 2.0, 0.0, 0.0])
    q = hk.rho_subgradient(hk.expected_shortfall(0.3), X4, UNIFORM4)
    assert q.density == pytest.approx([10.0 / 3.0, 2.0 / 3.0, 0.0, 0.0])
    q = hk.rho_subgradient(hk.neg_expectation(), X4, UNIFORM4)
    assert q.density == pytest.approx([1.0, 1.0, 1.0, 1.0])
    q = hk.rho_subgradient(hk.entropic(1.0), X4, UNIFORM4)
    expect = np.exp(-X4.values) / np.mean(np.exp(-X4.values))
    assert q.density == pytest.approx(expect)


def test_es_subgradient_splits_tied_atoms():
    space = hk.make_space(np.array([0.25, 0.25, 0.25, 0.25]))
    x = hk.Rv(np.array([-1.0, -1.0, 0.0, 1.0]))
    q = hk.rho_subgradient(hk.expected_shortfall(0.3), x, space)
    # No mass strictly below the quantile; 0.3 of mass spread over a tie of
    # total mass 0.5, proportionally: density 0.3/(0.3*0.5) = 2 on each.
    assert q.density == pytest.approx([2.0, 2.0, 0.0, 0.0])
    assert q.is_probability(space)


def test_subgradient_supports_inequality_and_attains(rng):
    for _ in range(120):
        k = int(rng.integers(2, 13))
        space = hk.make_space(positive_weights(rng, k))
        x = hk.Rv(rng.normal(scale=1.5, size=k))
        z = hk.Rv(rng.normal(scale=1.5, size=k))
        for rho in _measures(rng):
            q = hk.rho_subgradient(rho, x, space)
            assert q.is_probability(space)
            rx = hk.rho_eval(rho, x, space)
            rz = hk.rho_eval(rho, z, space)
            lower = rx - hk.expectation(hk.Rv(z.values - x.values), space, q)
            assert rz >= lower - 1e-9
            # attainment of the dual representation at the subgradient
            attained = -hk.expectation(x, space, q) - hk.rho_penalty(rho, q, space)
            assert rx == pytest.approx(attained, abs=1e-10)


# ---------------------------------------------------------------------------
# Penalties and dual sets.
# ---------------------------------------------------------------------------

def test_penalty_requires_probability():
    with pytest.raises(hk.NotProbability):
        hk.rho_penalty(hk.entropic(1.0), hk.Measure(np.ones(4) * 1.5), UNIFORM4)


def test_penalty_frozen_values():
    space = hk.make_space(np.array([0.5, 0.5]))
    q = hk.Measure(np.array([2.0, 0.0]))
    assert hk.rho_penalty(hk.entropic(1.0), q, space) == pytest.approx(math.log(2.0))
    assert hk.rho_penalty(hk.entropic(2.0), q, space) == pytest.approx(math.log(2.0) / 2.0)
    # ES dual polytope caps the density at 1/alpha.
    assert hk.rho_penalty(hk.expected_shortfall(0.5), q, space) == 0.0
    assert hk.rho_penalty(hk.expected_shortfall(0.6), q, space) == math.inf
    assert hk.rho_penalty(hk.neg_expectation(), q, space) == math.inf
    ones = hk.Measure(np.ones(2))
    assert hk.rho_penalty(hk.neg_expectation(), ones, space) == 0.0


def test_weak_duality_random_q(rng):
    for _ in range(100):
        k = int(rng.integers(2, 13))
        space = hk.make_space(positive_weights(rng, k))
        x = hk.Rv(rng.normal(scale=1.5, size=k))
        for rho in _measures(rng):
            y = hk.dual_set(rho).sample(space, rng)
            pen = hk.rho_penalty(rho, y, space)
            assert np.isfinite(pen)
            lower = -hk.expectation(x, space, y) - pen
            assert hk.rho_eval(rho, x, space) >= lower - 1e-9


def test_dual_set_membership(rng):
    space = hk.make_space(np.array([0.25, 0.25, 0.25, 0.25]))
    for rho in _measures(rng):
        dset = hk.dual_set(rho)
        for _ in range(25):
            y = dset.sample(space, rng)
            assert dset.contains(y, space)
        q = hk.rho_subgradient(rho, X4, space)
        assert dset.contains(q, space)
    es_set = hk.dual_set(hk.expected_shortfall(0.25))
    assert es_set.upper_bound == pytest.approx(4.0)
    assert not es_set.contains(hk.Measure(np.array([4.4, 0.0, 0.0, 0.0])), space)
