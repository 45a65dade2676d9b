"""Convex risk measures on finite scenario spaces.

Four measures are provided, each acting on the profit-and-loss variable X
(positive values are gains):

* ``neg_expectation``:  rho(X) = -E[X]
* ``entropic(a)``:      rho(X) = (1/a) log E[exp(-a X)]
* ``expected_shortfall(alpha)``:  rho(X) = (1/alpha) int_0^alpha VaR^u(X) du
* ``value_at_risk(alpha)``:       rho(X) = -F_X^{-1}(alpha)

The first three are convex and carry a dual representation

    rho(X) = max_Q { E_Q[-X] - penalty(Q) }

over probability measures Q absolutely continuous w.r.t. P. Value-at-risk
is not convex; it can be evaluated, but every duality operation rejects it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LevelOutOfRange, NonConvexMeasure, NotProbability
from .scenario import Measure, Rv, ScenarioSpace, _check_len, quantile

NEG_EXPECTATION = "neg_expectation"
ENTROPIC = "entropic"
EXPECTED_SHORTFALL = "expected_shortfall"
VALUE_AT_RISK = "value_at_risk"

# Slack used for dual-set membership (density bounds, unit-density checks).
DUAL_FEASIBILITY_TOL = 1e-10
# Atoms within this distance of the tail quantile count as ties.
_TIE_TOL = 1e-9


@dataclass(frozen=True)
class RiskMeasureSpec:
    """Tagged description of a risk measure and its parameters."""

    kind: str
    a: float = 0.0
    alpha: float = 0.0

    @property
    def is_convex(self) -> bool:
        return self.kind != VALUE_AT_RISK


def neg_expectation() -> RiskMeasureSpec:
    return RiskMeasureSpec(NEG_EXPECTATION)


def entropic(a: float) -> RiskMeasureSpec:
    if not a > 0.0:
        raise LevelOutOfRange(f"entropic risk aversion must be positive, got {a!r}")
    return RiskMeasureSpec(ENTROPIC, a=float(a))


def expected_shortfall(alpha: float) -> RiskMeasureSpec:
    if not 0.0 < alpha < 1.0:
        raise LevelOutOfRange(f"shortfall level must lie in (0, 1), got {alpha!r}")
    return RiskMeasureSpec(EXPECTED_SHORTFALL, alpha=float(alpha))


def value_at_risk(alpha: float) -> RiskMeasureSpec:
    if not 0.0 < alpha < 1.0:
        raise LevelOutOfRange(f"tail level must lie in (0, 1), got {alpha!r}")
    return RiskMeasureSpec(VALUE_AT_RISK, alpha=float(alpha))


def _require_convex(rho: RiskMeasureSpec, op: str) -> None:
    if not rho.is_convex:
        raise NonConvexMeasure(f"{op} requires a convex risk measure, got value-at-risk")


def _entropic_log_mgf(a: float, x: np.ndarray, w: np.ndarray) -> float:
    # log E[exp(-a X)] evaluated with a max shift so large exponents cannot
    # overflow before the log.
    t = -a * x
    m = float(t.max())
    return m + float(np.log(w @ np.exp(t - m)))


def rho_eval(rho: RiskMeasureSpec, x: Rv, space: ScenarioSpace) -> float:
    """Evaluate the risk measure at X."""
    _check_len(x.values, space)
    v, w = x.values, space.weights
    if rho.kind == NEG_EXPECTATION:
        return -float(w @ v)
    if rho.kind == ENTROPIC:
        return _entropic_log_mgf(rho.a, v, w) / rho.a
    if rho.kind == EXPECTED_SHORTFALL:
        # Exact tail average over sorted atoms: the atom straddling the
        # alpha boundary contributes only its fraction of mass.
        order = np.argsort(v, kind="stable")
        xs, ws = v[order], w[order]
        cum = np.cumsum(ws)
        prev = np.concatenate(([0.0], cum[:-1]))
        take = np.clip(np.minimum(cum, rho.alpha) - prev, 0.0, None)
        return -float(take @ xs) / rho.alpha
    if rho.kind == VALUE_AT_RISK:
        return -quantile(x, space, rho.alpha)
    raise ValueError(f"unknown risk measure kind {rho.kind!r}")


def rho_penalty(rho: RiskMeasureSpec, q: Measure, space: ScenarioSpace) -> float:
    """Penalty (convex conjugate) of the measure at a probability Q.

    neg_expectation is penalized 0 at P and +inf elsewhere; expected
    shortfall is 0 on its density polytope {0 <= dQ/dP <= 1/alpha} and +inf
    outside; the entropic penalty is relative entropy scaled by 1/a,

        penalty(Q) = (1/a) sum_i w_i d_i log d_i,   0 log 0 := 0.
    """
    _require_convex(rho, "rho_penalty")
    _check_len(q.density, space)
    if not q.is_probability(space):
        raise NotProbability(f"penalty requires a probability measure, mass={q.mass(space)!r}")
    d, w = q.density, space.weights
    if rho.kind == NEG_EXPECTATION:
        return 0.0 if np.max(np.abs(d - 1.0)) <= DUAL_FEASIBILITY_TOL else np.inf
    if rho.kind == EXPECTED_SHORTFALL:
        return 0.0 if np.max(d) <= 1.0 / rho.alpha + DUAL_FEASIBILITY_TOL else np.inf
    # entropic
    terms = np.where(d > 0.0, d * np.log(np.where(d > 0.0, d, 1.0)), 0.0)
    return float(w @ terms) / rho.a


def rho_subgradient(rho: RiskMeasureSpec, x: Rv, space: ScenarioSpace) -> Measure:
    """A maximizer Q of E_Q[-X] - penalty(Q), acting as Z -> E_Q[-Z].

    For expected shortfall the density is 1/alpha strictly below the tail
    quantile; atoms sitting exactly at the quantile share the remaining
    mass in proportion to their scenario weight.
    """
    _require_convex(rho, "rho_subgradient")
    _check_len(x.values, space)
    v, w = x.values, space.weights
    if rho.kind == NEG_EXPECTATION:
        return Measure(np.ones(space.k))
    if rho.kind == ENTROPIC:
        t = -rho.a * v
        t -= t.max()
        e = np.exp(t)
        return Measure(e / float(w @ e))
    # expected shortfall
    alpha = rho.alpha
    qv = quantile(x, space, alpha)
    tol = _TIE_TOL * (1.0 + abs(qv))
    below = v < qv - tol
    at = np.abs(v - qv) <= tol
    mass_below = float(w[below].sum())
    mass_at = float(w[at].sum())
    density = np.zeros(space.k)
    density[below] = 1.0 / alpha
    if mass_at > 0.0:
        density[at] = max(alpha - mass_below, 0.0) / (alpha * mass_at)
    return Measure(density)


@dataclass(frozen=True)
class DualSet:
    """Description of the dual set of a convex risk measure.

    ``upper_bound`` is the density cap (1/alpha) for expected shortfall and
    None otherwise. neg_expectation's dual set is the singleton {P}; the
    entropic dual set is every probability density (the penalty is finite
    everywhere, growing like relative entropy).
    """

    kind: str
    upper_bound: float | None = None

    def contains(self, q: Measure, space: ScenarioSpace, tol: float = 1e-9) -> bool:
        if not q.is_probability(space):
            return False
        if self.kind == NEG_EXPECTATION:
            return bool(np.max(np.abs(q.density - 1.0)) <= tol)
        if self.kind == EXPECTED_SHORTFALL:
            return bool(np.max(q.density) <= self.upper_bound + tol)
        return True

    def sample(self, space: ScenarioSpace, rng: np.random.Generator) -> Measure:
        """Draw some element of the dual set (used by randomized checks)."""
        if self.kind == NEG_EXPECTATION:
            return Measure(np.ones(space.k))
        if self.kind == ENTROPIC:
            z = np.exp(rng.normal(size=space.k))
            return Measure(z / float(space.weights @ z))
        # expected shortfall: mix tail-indicator vertices obtained by
        # subdifferentiating at random positions, then blend toward P.
        rho = RiskMeasureSpec(EXPECTED_SHORTFALL, alpha=1.0 / self.upper_bound)
        parts = [
            rho_subgradient(rho, Rv(rng.normal(size=space.k)), space).density
            for _ in range(3)
        ]
        lam = rng.dirichlet(np.ones(4))
        mix = lam[0] * np.ones(space.k)
        for c, p in zip(lam[1:], parts):
            mix = mix + c * p
        return Measure(mix)


def dual_set(rho: RiskMeasureSpec) -> DualSet:
    _require_convex(rho, "dual_set")
    if rho.kind == EXPECTED_SHORTFALL:
        return DualSet(rho.kind, upper_bound=1.0 / rho.alpha)
    return DualSet(rho.kind)
