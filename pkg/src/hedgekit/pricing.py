"""Indifference pricing and arbitrage bounds on a scenario market.

Seller and buyer prices come from the hedging value P(X) = inf_h rho_u of
the hedged book with claim X:

    seller = P(H) - P(0),      buyer = P(0) - P(-H),

so the seller price is the cash that restores indifference to writing the
claim, and buyer = -seller(-H). Superhedging bounds come from linear
programs over positions, martingale bounds from linear programs over
nonnegative martingale masses; on an arbitrage-free market the two pairs
coincide by LP duality, and with unconstrained positions the indifference
prices sit inside them whenever the preference is finite on the book.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LpInfeasible, LpUnbounded, NoEmm
from .hedge import SolverOptions, solve_numeric
from .market import ConstraintSet, Market, unconstrained
from .preference import ComposedPreference
from .scenario import Measure, Rv
from . import simplexlp

_EMM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class PriceReport:
    """Price summary for one claim.

    sp/bp are the indifference prices, superhedge/subhedge the arbitrage
    bounds, p_claim/p_zero/p_neg_claim the raw hedging values behind sp
    and bp (kept for auditing the differences)."""

    sp: float
    bp: float
    superhedge: float
    subhedge: float
    arbitrage_free: bool
    complete: bool
    p_claim: float
    p_zero: float
    p_neg_claim: float


def _hedge_value(pref, market: Market, cset, opts, claim: Rv) -> float:
    return solve_numeric(pref, market.with_claim(claim), cset, opts).value


def seller_price(
    pref: ComposedPreference,
    market: Market,
    cset: ConstraintSet | None = None,
    opts: SolverOptions | None = None,
) -> float:
    """Cash making the hedged writer indifferent to selling the claim."""
    cset = cset or unconstrained()
    zero = Rv.constant(0.0, market.space.k)
    return _hedge_value(pref, market, cset, opts, market.claim) - _hedge_value(
        pref, market, cset, opts, zero
    )


def buyer_price(
    pref: ComposedPreference,
    market: Market,
    cset: ConstraintSet | None = None,
    opts: SolverOptions | None = None,
) -> float:
    cset = cset or unconstrained()
    zero = Rv.constant(0.0, market.space.k)
    neg = Rv(-market.claim.values)
    return _hedge_value(pref, market, cset, opts, zero) - _hedge_value(
        pref, market, cset, opts, neg
    )


# ---------------------------------------------------------------------------
# Linear-programming bounds.
# ---------------------------------------------------------------------------

def superhedge_price(market: Market, claim: Rv) -> float:
    """Least initial capital dominating the claim: min x over x + dS h >= H.

    Returns -inf when the market lets the hedger dominate any payoff for
    free (an arbitrage)."""
    k, n = market.space.k, market.n_assets
    c = np.zeros(1 + n)
    c[0] = 1.0
    a_ub = np.hstack([-np.ones((k, 1)), -market.delta_s])
    b_ub = -claim.values
    free = np.ones(1 + n, dtype=bool)
    try:
        res = simplexlp.solve_general(c, a_ub=a_ub, b_ub=b_ub, free=free)
    except LpUnbounded:
        return -math.inf
    return res.value


def subhedge_price(market: Market, claim: Rv) -> float:
    """Greatest initial capital dominated by the claim; +inf under arbitrage."""
    return -superhedge_price(market, Rv(-claim.values))


def _emm_system(market: Market):
    """Equality block of the martingale-mass polytope in mass coordinates."""
    k = market.space.k
    a_eq = np.vstack([np.ones((1, k)), market.delta_s.T])
    b_eq = np.zeros(1 + market.n_assets)
    b_eq[0] = 1.0
    return a_eq, b_eq


def _max_min_mass(market: Market):
    """Maximize t subject to m_i >= t over martingale masses m."""
    k = market.space.k
    a_eq, b_eq = _emm_system(market)
    a_eq = np.hstack([a_eq, np.zeros((a_eq.shape[0], 1))])
    a_ub = np.hstack([-np.eye(k), np.ones((k, 1))])  # t - m_i <= 0
    b_ub = np.zeros(k)
    c = np.zeros(k + 1)
    c[-1] = -1.0
    free = np.ones(k + 1, dtype=bool)
    try:
        res = simplexlp.solve_general(c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq, free=free)
    except LpInfeasible:
        return None, -math.inf
    return res.x[:k], -res.value


def check_arbitrage(market: Market) -> bool:
    """True when the market is arbitrage-free, i.e. some strictly positive
    mass prices every increment to zero."""
    _, t_star = _max_min_mass(market)
    return t_star > _EMM_TOL


def emm_witness(market: Market) -> Measure:
    """A martingale measure with maximal minimum mass. Raises NoEmm when
    only degenerate masses exist."""
    m, t_star = _max_min_mass(market)
    if t_star <= _EMM_TOL:
        raise NoEmm("no strictly positive martingale mass exists")
    return Measure(m / market.space.weights)


def check_complete(market: Market) -> bool:
    """True when the martingale measure exists and is unique: the market is
    arbitrage-free and [1; dS'] has full column rank over scenarios."""
    if not check_arbitrage(market):
        return False
    a_eq, _ = _emm_system(market)
    s = np.linalg.svd(a_eq, compute_uv=False)
    rank = int(np.sum(s > 1e-9 * s[0]))
    return rank == market.space.k


def emm_bounds(market: Market, claim: Rv) -> tuple[float, float]:
    """Range of E_m[H] over the closed martingale-mass polytope.

    Equals (subhedge, superhedge) by LP duality. Raises NoEmm when the
    market is not arbitrage-free."""
    if not check_arbitrage(market):
        raise NoEmm("martingale bounds need an arbitrage-free market")
    a_eq, b_eq = _emm_system(market)
    free = np.zeros(market.space.k, dtype=bool)
    lo = simplexlp.solve_general(claim.values, a_eq=a_eq, b_eq=b_eq, free=free).value
    hi = -simplexlp.solve_general(-claim.values, a_eq=a_eq, b_eq=b_eq, free=free).value
    return lo, hi


def price_report(
    pref: ComposedPreference,
    market: Market,
    cset: ConstraintSet | None = None,
    opts: SolverOptions | None = None,
) -> PriceReport:
    """All price numbers for the market's claim in one pass."""
    cset = cset or unconstrained()
    opts = opts or SolverOptions()
    zero = Rv.constant(0.0, market.space.k)
    neg = Rv(-market.claim.values)
    p_claim = _hedge_value(pref, market, cset, opts, market.claim)
    p_zero = _hedge_value(pref, market, cset, opts, zero)
    p_neg = _hedge_value(pref, market, cset, opts, neg)
    return PriceReport(
        sp=p_claim - p_zero,
        bp=p_zero - p_neg,
        superhedge=superhedge_price(market, market.claim),
        subhedge=subhedge_price(market, market.claim),
        arbitrage_free=check_arbitrage(market),
        complete=check_complete(market),
        p_claim=p_claim,
        p_zero=p_zero,
        p_neg_claim=p_neg,
    )
