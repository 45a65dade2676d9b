"""Shared builders for randomized markets and preferences."""
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

import hedgekit as hk

settings.register_profile(
    "suite",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


def positive_weights(rng, k):
    """Strictly positive normalized weights, bounded away from zero."""
    w = rng.dirichlet(np.ones(k)) + 0.1 / k
    return w / w.sum()


def random_market(rng, k, n, arbitrage_free=True, claim_range=(0.0, 2.0), v0=1.0):
    """Random scenario market. Centering the increments under a strictly
    positive mass makes that mass a martingale measure, so the market is
    arbitrage-free by construction."""
    space = hk.make_space(positive_weights(rng, k))
    ds = rng.normal(size=(k, n))
    if arbitrage_free:
        m = positive_weights(rng, k)
        ds = ds - m @ ds
    claim = hk.Rv(rng.uniform(*claim_range, size=k))
    return hk.Market(delta_s=ds, claim=claim, v0=v0, space=space)


def random_rv(rng, k, scale=2.0):
    return hk.Rv(rng.normal(scale=scale, size=k))


def convex_measures(rng):
    return [
        hk.neg_expectation(),
        hk.entropic(float(rng.uniform(0.3, 2.0))),
        hk.expected_shortfall(float(rng.uniform(0.1, 0.9))),
    ]


def random_utility(rng):
    pick = rng.integers(3)
    if pick == 0:
        return hk.affine(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.5, 1.5)))
    if pick == 1:
        return hk.exponential(float(rng.uniform(0.3, 1.5)))
    return hk.shortfall()


def random_pref(rng):
    measures = convex_measures(rng)
    return hk.ComposedPreference(measures[rng.integers(3)], random_utility(rng))


def random_smooth_pref(rng):
    """Differentiable compositions with strictly convex hedge objectives.
    neg_expectation with affine utility is excluded: that book value is
    linear in h, hence unbounded on non-compact sets."""
    pick = rng.integers(3)
    if pick == 0:
        return hk.ComposedPreference(
            hk.neg_expectation(), hk.exponential(float(rng.uniform(0.3, 1.5)))
        )
    if pick == 1:
        return hk.ComposedPreference(
            hk.entropic(float(rng.uniform(0.3, 2.0))),
            hk.affine(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.5, 1.5))),
        )
    return hk.ComposedPreference(
        hk.entropic(float(rng.uniform(0.3, 2.0))),
        hk.exponential(float(rng.uniform(0.3, 1.5))),
    )


def random_pl_pref(rng):
    """Piecewise-linear compositions, solvable by the exact LP route."""
    rho = hk.neg_expectation() if rng.integers(2) == 0 else hk.expected_shortfall(
        float(rng.uniform(0.15, 0.9))
    )
    if rng.integers(2) == 0:
        u = hk.affine(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.5, 1.5)))
    else:
        u = hk.shortfall()
    return hk.ComposedPreference(rho, u)


def bounded_es_alpha(market, frac=0.9):
    """Tail level keeping expected-shortfall hedging bounded on this market:
    some martingale density must fit under 1/alpha."""
    density = hk.emm_witness(market).density
    return min(0.5, frac / float(density.max()))


def sample_feasible_q(pref, space, rng):
    """Measure with finite composed penalty for the given preference."""
    k = space.k
    w = space.weights
    u = pref.u
    if u.kind == "affine":
        y = hk.dual_set(pref.rho).sample(space, rng)
        return hk.Measure(u.b * y.density)
    z = rng.uniform(0.2, 1.0, size=k)
    if u.kind == "exponential":
        # Any nonnegative measure is feasible; vary the mass.
        return hk.Measure(z * float(rng.uniform(0.2, 2.0)))
    # Shortfall: need q <= y for a dual density y, so keep q below both the
    # polytope cap and unit mass.
    cap = 1.0 / pref.rho.alpha if pref.rho.kind == "expected_shortfall" else np.inf
    q = z * min(1.0, 0.9 * cap)
    mass = float(w @ q)
    return hk.Measure(q * min(1.0, 0.9 / mass))


@pytest.fixture
def rng():
    return np.random.default_rng(20260819)
