"""Acceptance gate: nine end-to-end criteria, one test and one printed
pass/fail line each. Tolerances are part of the contract; do not loosen."""
import contextlib
import math
import subprocess
import sys

import numpy as np
import pytest
from scipy.optimize import minimize
from scipy.stats import norm

import hedgekit as hk
from hedgekit.errors import NoEmm

from conftest import (
    bounded_es_alpha,
    positive_weights,
    random_market,
    random_pref,
    random_rv,
    random_smooth_pref,
    sample_feasible_q,
)

IDENTITY = hk.affine(0.0, 1.0)


@contextlib.contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"{name}: FAIL")
        raise
    print(f"{name}: PASS")


def _measures(rng):
    return [
        hk.neg_expectation(),
        hk.entropic(float(rng.uniform(0.3, 2.0))),
        hk.expected_shortfall(float(rng.uniform(0.1, 0.9))),
    ]


def test_a1_axiom_suite(rng):
    with criterion("A1 risk measure axioms"):
        tol = 1e-9
        for _ in range(1000):
            k = int(rng.integers(2, 17))
            space = hk.make_space(positive_weights(rng, k))
            x = random_rv(rng, k)
            y = hk.Rv(x.values + np.abs(rng.normal(size=k)))  # y >= x
            z = random_rv(rng, k)
            c = float(rng.normal(scale=2.0))
            lam = float(rng.uniform())
            t = float(rng.uniform(0.1, 4.0))
            for rho in _measures(rng):
                rx = hk.rho_eval(rho, x, space)
                # monotone: more payoff, less risk
                assert hk.rho_eval(rho, y, space) <= rx + tol
                # translation: cash reduces risk one for one
                shifted = hk.rho_eval(rho, hk.Rv(x.values + c), space)
                assert abs(shifted - (rx - c)) <= tol
                # convexity of the mixture
                mix = hk.Rv(lam * x.values + (1.0 - lam) * z.values)
                bound = lam * rx + (1.0 - lam) * hk.rho_eval(rho, z, space)
                assert hk.rho_eval(rho, mix, space) <= bound + tol
            es = hk.expected_shortfall(float(rng.uniform(0.1, 0.9)))
            assert abs(
                hk.rho_eval(es, hk.Rv(t * x.values), space)
                - t * hk.rho_eval(es, x, space)
            ) <= tol


def test_a2_duality_attainment_and_weak_duality(rng):
    with criterion("A2 duality attainment"):
        for _ in range(500):
            k = int(rng.integers(2, 13))
            space = hk.make_space(positive_weights(rng, k))
            pref = random_pref(rng)
            x = random_rv(rng, k)
            q_star = hk.rho_u_subgradient(pref, x, space)
            gap = hk.duality_gap(pref, x, q_star, space)
            assert abs(gap) <= 1e-7
            for _ in range(20):
                q = sample_feasible_q(pref, space, rng)
                assert hk.duality_gap(pref, x, q, space) >= -1e-8


def test_a3_subgradient_directional_derivatives(rng):
    with criterion("A3 smooth directional derivatives"):
        for _ in range(200):
            k = int(rng.integers(2, 13))
            space = hk.make_space(positive_weights(rng, k))
            rho = (
                hk.neg_expectation()
                if rng.integers(2) == 0
                else hk.entropic(float(rng.uniform(0.3, 2.0)))
            )
            u = (
                hk.affine(float(rng.uniform(-0.5, 0.5)), float(rng.uniform(0.5, 1.5)))
                if rng.integers(2) == 0
                else hk.exponential(float(rng.uniform(0.3, 1.5)))
            )
            pref = hk.ComposedPreference(rho, u)
            x = random_rv(rng, k)
            q = hk.rho_u_subgradient(pref, x, space)
            d = rng.normal(size=k)
            slope = -float(space.weights @ (q.density * d))
            eps = 1e-6
            up = hk.rho_u_eval(pref, hk.Rv(x.values + eps * d), space)
            dn = hk.rho_u_eval(pref, hk.Rv(x.values - eps * d), space)
            fd = (up - dn) / (2.0 * eps)
            assert abs(slope - fd) <= 1e-5 * (1.0 + abs(fd))


def test_a4_gaussian_meanvar_closed_form(rng):
    with criterion("A4 mean-variance closed form"):
        for _ in range(50):
            n = int(rng.integers(2, 7))
            m = rng.normal(size=(n, n))
            sigma = m @ m.T + n * np.eye(n)
            mu = rng.normal(size=n)
            a = float(rng.uniform(0.3, 3.0))
            gm = hk.GaussianMarket(mu, sigma)
            sol = hk.solve_gaussian_meanvar(gm, a)
            ref = minimize(
                lambda h: -h @ mu + 0.5 * a * h @ sigma @ h,
                np.ones(n) / n,
                jac=lambda h: -mu + a * sigma @ h,
                constraints=[{"type": "eq", "fun": lambda h: h.sum() - 1.0}],
                method="SLSQP",
                options={"maxiter": 400, "ftol": 1e-15},
            )
            assert ref.success
            assert np.max(np.abs(sol.h - ref.x)) <= 1e-5
            assert sol.residual <= 1e-9
            # the two smooth pairs reduce to the same portfolio
            b = float(rng.uniform(0.5, 2.0))
            via_exp = hk.solve_gaussian_meanvar(
                gm, a, hk.ComposedPreference(hk.neg_expectation(), hk.exponential(a))
            )
            via_affine = hk.solve_gaussian_meanvar(
                gm, a, hk.ComposedPreference(hk.entropic(a / b), hk.affine(0.0, b))
            )
            assert np.max(np.abs(via_exp.h - via_affine.h)) <= 1e-9


def test_a5_gaussian_es_exp_against_monte_carlo(rng):
    with criterion("A5 shortfall-of-exponential closed form"):
        n_draws = 1_000_000
        n_batches = 20
        batch = n_draws // n_batches
        space_full = hk.make_space(np.full(n_draws, 1.0 / n_draws))
        space_batch = hk.make_space(np.full(batch, 1.0 / batch))
        for _ in range(20):
            n = int(rng.integers(2, 5))
            mroot = rng.normal(size=(n, n))
            gm = hk.GaussianMarket(rng.normal(size=n) * 0.3, mroot @ mroot.T + n * np.eye(n))
            a = float(rng.uniform(0.2, 1.0))
            alpha = float(rng.uniform(0.05, 0.4))
            h = rng.dirichlet(np.ones(n))
            closed = hk.gaussian_es_exp_objective(h, gm, a, alpha)
            m = float(h @ gm.mu)
            s = math.sqrt(float(h @ gm.sigma @ h))
            draws = m + s * rng.standard_normal(n_draws)
            y = hk.Rv(hk.u_map(hk.exponential(a), draws))
            es = hk.expected_shortfall(alpha)
            full = hk.rho_eval(es, y, space_full)
            batches = [
                hk.rho_eval(es, hk.Rv(y.values[i * batch : (i + 1) * batch]), space_batch)
                for i in range(n_batches)
            ]
            se = float(np.std(batches, ddof=1)) / math.sqrt(n_batches)
            assert abs(closed - full) <= 3.0 * se
            # analytic gradient against central differences, tangent to the
            # budget so the domain check stays satisfied
            g = hk.gaussian_es_exp_gradient(h, gm, a, alpha)
            for _ in range(3):
                d = rng.normal(size=n)
                d -= d.mean()
                eps = 1e-6
                up = hk.gaussian_es_exp_objective(h + eps * d, gm, a, alpha)
                dn = hk.gaussian_es_exp_objective(h - eps * d, gm, a, alpha)
                fd = (up - dn) / (2.0 * eps)
                assert abs(float(g @ d) - fd) <= 1e-4 * (1.0 + abs(fd))


def test_a6_normal_cone_certificates(rng):
    with criterion("A6 optimality certificates"):
        opts = hk.SolverOptions(multistarts=1, max_iter=1200)
        kinds = ["budget", "longonly", "box", "unconstrained"]
        for i in range(100):
            k = int(round(math.exp(rng.uniform(math.log(3), math.log(200)))))
            n = int(rng.integers(1, 6))
            market = random_market(rng, k=k, n=n)
            pref = random_smooth_pref(rng)
            kind = kinds[i % 4]
            if kind == "budget":
                cset = hk.budget_hyperplane()
            elif kind == "longonly":
                cset = hk.long_only_simplex()
            elif kind == "box":
                width = rng.uniform(0.5, 2.0, n)
                cset = hk.box(-width, width)
            else:
                cset = hk.unconstrained()
            sol = hk.solve_numeric(pref, market, cset, opts)
            assert sol.residual <= 1e-6
            # feasible perturbations cost strictly more
            for _ in range(3):
                h2 = hk.project(cset, sol.h + rng.normal(scale=0.05, size=n))
                if float(np.linalg.norm(h2 - sol.h)) <= 1e-7:
                    continue
                v2 = hk.rho_u_eval(
                    pref, hk.hedged_position(market, h2), market.space
                )
                assert v2 > sol.value


def test_a7_pricing_bounds(rng):
    with criterion("A7 pricing order and bounds"):
        # seller >= buyer >= 0 on nonnegative claims
        simplex = hk.long_only_simplex()
        for i in range(200):
            market = random_market(rng, k=int(rng.integers(3, 12)), n=int(rng.integers(1, 4)))
            if i % 25 == 0:
                pref = hk.ComposedPreference(hk.entropic(float(rng.uniform(0.5, 1.5))), IDENTITY)
                opts = hk.SolverOptions(multistarts=1, max_iter=400)
            else:
                rho = (
                    hk.neg_expectation()
                    if rng.integers(2) == 0
                    else hk.expected_shortfall(float(rng.uniform(0.2, 0.8)))
                )
                u = IDENTITY if rng.integers(2) == 0 else hk.shortfall()
                pref = hk.ComposedPreference(rho, u)
                opts = None
            sp = hk.seller_price(pref, market, simplex, opts)
            bp = hk.buyer_price(pref, market, simplex, opts)
            assert sp >= bp - 1e-6
            assert bp >= -1e-6

        # arbitrage-free, identity utility, unconstrained: the indifference
        # interval sits inside the hedging interval
        for i in range(16):
            market = random_market(rng, k=int(rng.integers(3, 9)), n=2)
            sub = hk.subhedge_price(market, market.claim)
            sup = hk.superhedge_price(market, market.claim)
            if i % 4 == 0:
                pref = hk.ComposedPreference(hk.entropic(float(rng.uniform(0.5, 1.5))), IDENTITY)
                opts = hk.SolverOptions(multistarts=1, max_iter=400)
            else:
                pref = hk.ComposedPreference(
                    hk.expected_shortfall(bounded_es_alpha(market)), IDENTITY
                )
                opts = None
            sp = hk.seller_price(pref, market, opts=opts)
            bp = hk.buyer_price(pref, market, opts=opts)
            assert sub - 1e-6 <= bp <= sp + 1e-9 <= sup + 1e-6

        # martingale bounds match the hedging LP bounds
        for _ in range(30):
            market = random_market(rng, k=int(rng.integers(3, 10)), n=int(rng.integers(1, 4)))
            lo, hi = hk.emm_bounds(market, market.claim)
            assert hi == pytest.approx(hk.superhedge_price(market, market.claim), abs=1e-8)
            assert lo == pytest.approx(hk.subhedge_price(market, market.claim), abs=1e-8)

        # complete markets price uniquely under cash-additive preferences
        built = 0
        while built < 10:
            k = int(rng.integers(2, 5))
            market = random_market(rng, k=k, n=k - 1)
            if not hk.check_complete(market):
                continue
            built += 1
            pref = hk.ComposedPreference(
                hk.expected_shortfall(bounded_es_alpha(market)), IDENTITY
            )
            sp = hk.seller_price(pref, market)
            bp = hk.buyer_price(pref, market)
            assert abs(sp - bp) <= 1e-6

        # attainable claims price like the funding cash
        for _ in range(10):
            market = random_market(rng, k=6, n=2)
            h_bar = rng.normal(size=2)
            attainable = hk.Rv(market.v0 + market.delta_s @ h_bar)
            const = hk.Rv(np.full(6, market.v0))
            pref = hk.ComposedPreference(
                hk.expected_shortfall(bounded_es_alpha(market)), IDENTITY
            )
            sp_att = hk.seller_price(pref, market.with_claim(attainable))
            sp_const = hk.seller_price(pref, market.with_claim(const))
            assert abs(sp_att - sp_const) <= 1e-6


def test_a8_shortfall_conjugate_and_subgradient(rng):
    with criterion("A8 shortfall utility machinery"):
        u = hk.shortfall()
        grid = [-0.5, 0.0, 0.25, 1.0, 1.5]
        expected = [math.inf, 0.0, 0.0, 0.0, math.inf]
        for y, want in zip(grid, expected):
            assert hk.u_conjugate(u, y) == want
        for _ in range(100):
            k = int(rng.integers(2, 13))
            space = hk.make_space(positive_weights(rng, k))
            rho = _measures(rng)[int(rng.integers(3))]
            x = random_rv(rng, k)
            pref = hk.ComposedPreference(rho, u)
            q = hk.rho_u_subgradient(pref, x, space)
            y = hk.rho_subgradient(rho, hk.Rv(hk.u_map(u, x.values)), space)
            assert np.array_equal(q.density, y.density * (x.values <= 0.0))


def test_a9_cli_determinism():
    with criterion("A9 CLI determinism"):
        cmd = [
            sys.executable,
            "-m",
            "hedgekit.cli",
            "hedge",
            "--scenarios",
            "tests/fixtures/scenarios4.csv",
            "--measure",
            "es",
            "--alpha",
            "0.5",
            "--utility",
            "affine",
            "--constraint",
            "budget",
            "--seed",
            "42",
        ]
        runs = [
            subprocess.run(cmd, capture_output=True, text=True, check=True)
            for _ in range(2)
        ]
        assert runs[0].stdout == runs[1].stdout
        assert runs[0].stdout.startswith("{")
