"""Concave utilities and their composition with convex risk measures.

The composed preference is rho_u(X) = rho(u(X)) for a concave increasing
utility u with u(0) = 0 (shortfall and exponential; affine is normalized by
its own intercept). Writing u*(y) = sup_x { u(x) - x y } for the concave
conjugate, the composition is again a convex risk functional with

    rho_u(X) = max_{Q >= 0} { E[-X dQ/dP] - penalty_u(Q) },

    penalty_u(Q) = min_Y { penalty_rho(Y) + sum_i w_i y_i u*(q_i / y_i) },

where Y runs over the dual set of rho and the summand is the perspective
of u*: a term with y_i = 0 contributes 0 when q_i = 0 and +inf otherwise.
The inner minimization is solved exactly per measure kind: a single
evaluation at P for neg_expectation, and one-dimensional dual search
(water filling) for the shortfall polytope and the entropic family, both
of which are separable in Y with a single mass constraint.

Subgradients follow the chain rule: if Y is a subgradient measure of rho
at u(X), then Q with density q_i = y_i u'(X_i) represents a subgradient of
rho_u at X, acting on directions as Z -> E_Q[-Z]. At the shortfall kink
x = 0 the selector u'(0) := 1 is used.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LevelOutOfRange, NonConvexMeasure
from .riskmeasures import (
    ENTROPIC,
    EXPECTED_SHORTFALL,
    NEG_EXPECTATION,
    RiskMeasureSpec,
    rho_eval,
    rho_subgradient,
)
from .scenario import Measure, Rv, ScenarioSpace, _check_len, expectation

AFFINE = "affine"
EXPONENTIAL = "exponential"
SHORTFALL = "shortfall"

# Slack for the hard domain constraints of conjugates (affine slope match,
# polytope membership of the forced dual point).
_DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class UtilitySpec:
    """Tagged description of a concave increasing utility."""

    kind: str
    a: float = 0.0  # intercept (affine) or curvature (exponential)
    b: float = 1.0  # slope (affine only)


def affine(a: float = 0.0, b: float = 1.0) -> UtilitySpec:
    if not b > 0.0:
        raise LevelOutOfRange(f"affine utility slope must be positive, got {b!r}")
    return UtilitySpec(AFFINE, a=float(a), b=float(b))


def exponential(a: float) -> UtilitySpec:
    if not a > 0.0:
        raise LevelOutOfRange(f"exponential utility parameter must be positive, got {a!r}")
    return UtilitySpec(EXPONENTIAL, a=float(a))


def shortfall() -> UtilitySpec:
    return UtilitySpec(SHORTFALL)


def u_eval(u: UtilitySpec, x: float) -> float:
    return float(u_map(u, np.asarray([x], dtype=float))[0])


def u_map(u: UtilitySpec, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if u.kind == AFFINE:
        return u.a + u.b * x
    if u.kind == EXPONENTIAL:
        return 1.0 - np.exp(-u.a * x)
    if u.kind == SHORTFALL:
        return np.minimum(x, 0.0)
    raise ValueError(f"unknown utility kind {u.kind!r}")


def u_slope(u: UtilitySpec, x: np.ndarray) -> np.ndarray:
    """Derivative selector u'(x); the shortfall kink at 0 uses slope 1."""
    x = np.asarray(x, dtype=float)
    if u.kind == AFFINE:
        return np.full_like(x, u.b)
    if u.kind == EXPONENTIAL:
        return u.a * np.exp(-u.a * x)
    return np.where(x <= 0.0, 1.0, 0.0)


def u_conjugate(u: UtilitySpec, y: float) -> float:
    """u*(y) = sup_x { u(x) - x y }, +inf outside the effective domain.

    Closed forms: the affine utility's conjugate equals its intercept at
    y = b and is +inf elsewhere; the shortfall conjugate is the indicator
    of [0, 1]; the exponential conjugate is +inf for y < 0, equals 1 at
    y = 0 and 1 - y/a + (y/a) log(y/a) for y > 0.
    """
    y = float(y)
    if u.kind == AFFINE:
        return u.a if abs(y - u.b) <= 1e-12 * (1.0 + abs(u.b)) else math.inf
    if u.kind == EXPONENTIAL:
        if y < 0.0:
            return math.inf
        if y == 0.0:
            return 1.0
        r = y / u.a
        return 1.0 - r + r * math.log(r)
    # shortfall
    return 0.0 if 0.0 <= y <= 1.0 else math.inf


@dataclass(frozen=True)
class ComposedPreference:
    """Pair (rho, u); rejects non-convex rho at construction."""

    rho: RiskMeasureSpec
    u: UtilitySpec

    def __post_init__(self):
        if not self.rho.is_convex:
            raise NonConvexMeasure("composed preferences require a convex risk measure")


def rho_u_eval(pref: ComposedPreference, x: Rv, space: ScenarioSpace) -> float:
    """rho(u(X)), applying the utility scenario by scenario."""
    _check_len(x.values, space)
    return rho_eval(pref.rho, Rv(u_map(pref.u, x.values)), space)


def rho_u_subgradient(pref: ComposedPreference, x: Rv, space: ScenarioSpace) -> Measure:
    """Chain-rule subgradient measure of the composition at X.

    Satisfies rho_u(Z) - rho_u(X) >= E[(Z - X) (-q)] for all Z, and attains
    the dual representation: duality_gap(pref, X, Q) == 0 up to round-off.
    """
    _check_len(x.values, space)
    inner = Rv(u_map(pref.u, x.values))
    y = rho_subgradient(pref.rho, inner, space)
    return Measure(y.density * u_slope(pref.u, x.values))


def duality_gap(pref: ComposedPreference, x: Rv, q: Measure, space: ScenarioSpace) -> float:
    """rho_u(X) - (E_Q[-X] - penalty_u(Q)); nonnegative, zero at maximizers."""
    pen = rho_u_penalty(pref, q, space)
    if math.isinf(pen):
        return math.inf
    return rho_u_eval(pref, x, space) + expectation(x, space, q) + pen


# ---------------------------------------------------------------------------
# Penalty of the composition.
# ---------------------------------------------------------------------------

def rho_u_penalty(pref: ComposedPreference, q: Measure, space: ScenarioSpace) -> float:
    """Penalty of rho_u at a nonnegative measure Q (not necessarily unit mass).

    Dispatches on the risk measure kind and solves the inner minimization
    over its dual set exactly; see the module docstring for the form.
    """
    _check_len(q.density, space)
    w = space.weights
    qd = q.density
    rho, u = pref.rho, pref.u
    if rho.kind == NEG_EXPECTATION:
        vals = np.array([u_conjugate(u, qi) for qi in qd])
        return math.inf if np.any(np.isinf(vals)) else float(w @ vals)
    if rho.kind == EXPECTED_SHORTFALL:
        return _penalty_shortfall_polytope(u, qd, w, 1.0 / rho.alpha)
    if rho.kind == ENTROPIC:
        return _penalty_entropic(u, qd, w, rho.a)
    raise ValueError(f"unknown risk measure kind {rho.kind!r}")


def _perspective_sum(u: UtilitySpec, qd: np.ndarray, y: np.ndarray, w: np.ndarray) -> float:
    # sum_i w_i y_i u*(q_i / y_i) with the closure conventions at y_i = 0.
    total = 0.0
    for qi, yi, wi in zip(qd, y, w):
        if yi <= 0.0:
            if qi > 0.0:
                return math.inf
            continue
        c = u_conjugate(u, qi / yi)
        if math.isinf(c):
            return math.inf
        total += wi * yi * c
    return total


def _penalty_shortfall_polytope(u: UtilitySpec, qd, w, cap: float) -> float:
    """Minimize the perspective sum over {0 <= y <= cap, sum w y = 1}."""
    if u.kind == AFFINE:
        # The conjugate pins q_i / y_i = b, so y = q / b is forced.
        y = qd / u.b
        if abs(float(w @ y) - 1.0) > _DOMAIN_TOL or np.max(y, initial=0.0) > cap + _DOMAIN_TOL:
            return math.inf
        return u.a
    if u.kind == SHORTFALL:
        # Feasibility of y >= q inside the polytope is all that matters.
        mass = float(w @ qd)
        if np.max(qd, initial=0.0) > cap + _DOMAIN_TOL or mass > 1.0 + _DOMAIN_TOL:
            return math.inf
        return 0.0
    # Exponential utility. Separable convex objective with one mass
    # constraint; the dual variable kappa prices mass and each coordinate
    # solves y_i = clip(q_i / (a (1 + kappa)), 0, cap), with coordinates
    # q_i = 0 dropping to zero while 1 + kappa > 0.
    a = u.a
    pos = qd > 0.0
    p_pos = float(w[pos].sum())
    y = np.zeros_like(qd)
    if p_pos * cap < 1.0 - 1e-15:
        # Mass cannot be met on supp(Q) alone even at the cap: the dual
        # sits at kappa = -1 where zero-q coordinates are free riders.
        y[pos] = cap
        rem = 1.0 - p_pos * cap
        value = _perspective_sum(u, qd, y, w)
        return value + rem  # each unit of extra mass costs u*(0) = 1

    def mass_at(kappa: float) -> float:
        yk = np.minimum(qd / (a * (1.0 + kappa)), cap)
        yk[~pos] = 0.0
        return float(w @ yk)

    lo, hi = -1.0 + 1e-13, 1.0
    while mass_at(hi) > 1.0:
        hi = 2.0 * hi + 1.0
        if hi > 1e16:
            break
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mass_at(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    kappa = 0.5 * (lo + hi)
    y = np.minimum(qd / (a * (1.0 + kappa)), cap)
    y[~pos] = 0.0
    return _perspective_sum(u, qd, y, w)


def _relative_entropy(y: np.ndarray, w: np.ndarray, a: float) -> float:
    terms = np.where(y > 0.0, y * np.log(np.where(y > 0.0, y, 1.0)), 0.0)
    return float(w @ terms) / a


def _lambertw_exp(z: np.ndarray) -> np.ndarray:
    """Principal-branch W0(exp(z)), stable for arguments where exp(z)
    overflows: there W solves w + log w = z and the asymptotic start
    z - log z converges in a few Newton steps."""
    from scipy.special import lambertw

    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    direct = z <= 700.0
    if direct.any():
        out[direct] = lambertw(np.exp(z[direct])).real
    big = ~direct
    if big.any():
        zb = z[big]
        v = zb - np.log(zb)
        for _ in range(4):
            v -= (v + np.log(v) - zb) / (1.0 + 1.0 / v)
        out[big] = v
    return out


def _penalty_entropic(u: UtilitySpec, qd, w, a_rho: float) -> float:
    """Minimize relative entropy / a_rho plus the perspective sum over
    probability densities y."""
    if u.kind == AFFINE:
        y = qd / u.b
        if abs(float(w @ y) - 1.0) > _DOMAIN_TOL:
            return math.inf
        return _relative_entropy(y, w, a_rho) + u.a
    if u.kind == SHORTFALL:
        # y >= q and unit mass; entropy is minimized by water filling
        # y_i = max(q_i, tau).
        mass = float(w @ qd)
        if mass > 1.0 + _DOMAIN_TOL:
            return math.inf
        lo, hi = 0.0, 1.0
        while float(w @ np.maximum(qd, hi)) < 1.0:
            hi *= 2.0
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if float(w @ np.maximum(qd, mid)) < 1.0:
                lo = mid
            else:
                hi = mid
        y = np.maximum(qd, 0.5 * (lo + hi))
        return _relative_entropy(y, w, a_rho)
    # Exponential utility. The coordinate stationarity condition
    #   (1/a_rho)(log y + 1) + 1 + kappa = q_i / (a_u y)
    # solves in closed form: y_i = (a_rho q_i / a_u) / W0(A_i) with
    # A_i = (a_rho q_i / a_u) exp(1 + a_rho (1 + kappa)), leaving only a
    # one-dimensional Newton search for the mass multiplier kappa.
    a_u = u.a
    pos = qd > 0.0
    qp = qd[pos]
    w_pos = w[pos]
    w_zero = float(w[~pos].sum())
    ratio = a_rho * qp / a_u
    log_ratio = np.log(ratio)

    def mass_grad(kappa: float):
        with np.errstate(over="ignore", divide="ignore"):
            big_w = _lambertw_exp(log_ratio + 1.0 + a_rho * (1.0 + kappa))
            y_pos = ratio / np.maximum(big_w, 5e-324)
            y_zero = math.exp(min(-a_rho * (1.0 + kappa) - 1.0, 700.0))
            m = float(w_pos @ y_pos) + w_zero * y_zero
            dm = float(w_pos @ (-a_rho * y_pos / (1.0 + big_w))) - w_zero * a_rho * y_zero
        return m, dm, y_pos, y_zero

    lo, hi = -1.0, 1.0
    while mass_grad(lo)[0] < 1.0 and lo > -1e7:
        lo = 2.0 * lo - 1.0
    while mass_grad(hi)[0] > 1.0 and hi < 1e7:
        hi = 2.0 * hi + 1.0
    kappa = 0.5 * (lo + hi)
    for _ in range(80):
        m, dm, y_pos, y_zero = mass_grad(kappa)
        if abs(m - 1.0) <= 1e-14:
            break
        if m > 1.0:
            lo = kappa
        else:
            hi = kappa
        step = kappa - (m - 1.0) / dm if dm < 0.0 else math.nan
        kappa = step if lo < step < hi else 0.5 * (lo + hi)
    y = np.full_like(qd, y_zero)
    y[pos] = y_pos
    return _relative_entropy(y, w, a_rho) + _perspective_sum(u, qd, y, w)
