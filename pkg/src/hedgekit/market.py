"""One-period scenario markets and hedge constraint sets.

A market holds the matrix of discounted price increments dS (one row per
scenario, one column per asset), a claim H, and initial capital v0. The
seller of H who buys h units of each asset ends with V - H where
V = v0 + h'dS, so the hedged book in return form is

    position(h) = dS h - dH,      dH = H - v0.

Constraint sets describe the admissible h. Each kind supports Euclidean
projection, a support function sup_{h in C} E_Q[V], and the distance from
a vector to the normal cone N_C(h), which is the optimality certificate
for hedging: h is optimal iff the vector g_i = E_Q[dS_i] built from a
subgradient measure Q at the hedged position lies in N_C(h).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DimensionMismatch, Infeasible, LevelOutOfRange
from .scenario import Measure, Rv, ScenarioSpace, _check_len

UNCONSTRAINED = "unconstrained"
BUDGET = "budget"
LONG_ONLY = "longonly"
BOX = "box"

# A point counts as feasible when its projection displaces it by no more.
FEASIBILITY_TOL = 1e-8
# Support functions treat moment vectors within this of a face as on it.
_SUPPORT_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class Market:
    delta_s: np.ndarray  # (k, n) price increments
    claim: Rv
    v0: float
    space: ScenarioSpace

    def __post_init__(self):
        ds = np.asarray(self.delta_s, dtype=float)
        if ds.ndim != 2 or ds.shape[0] == 0 or ds.shape[1] == 0:
            raise DimensionMismatch(f"delta_s must be a 2-d array, got shape {ds.shape}")
        if not np.all(np.isfinite(ds)):
            raise DimensionMismatch("delta_s contains non-finite entries")
        if ds.shape[0] != self.space.k:
            raise DimensionMismatch(
                f"delta_s has {ds.shape[0]} rows for {self.space.k} scenarios"
            )
        _check_len(self.claim.values, self.space)
        if not self.v0 > 0.0:
            raise LevelOutOfRange(f"initial capital must be positive, got {self.v0!r}")
        ds = ds.copy()
        ds.setflags(write=False)
        object.__setattr__(self, "delta_s", ds)
        object.__setattr__(self, "v0", float(self.v0))

    @property
    def n_assets(self) -> int:
        return self.delta_s.shape[1]

    @property
    def delta_claim(self) -> np.ndarray:
        """dH = H - v0, the claim excess over the funding capital."""
        return self.claim.values - self.v0

    def with_claim(self, claim: Rv) -> "Market":
        return replace(self, claim=claim)


def hedged_position(market: Market, h: np.ndarray) -> Rv:
    """Book value dS h - dH of the seller hedging with h."""
    h = _check_h(market.n_assets, h)
    return Rv(market.delta_s @ h - market.delta_claim)


def _check_h(n: int, h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (n,):
        raise DimensionMismatch(f"h has shape {h.shape}, expected ({n},)")
    return h


@dataclass(frozen=True, eq=False)
class ConstraintSet:
    """One of: unconstrained, budget hyperplane (sum h = 1), long-only
    simplex (sum h = 1, h >= 0), or a coordinate box [lo, hi]."""

    kind: str
    lo: np.ndarray | None = None
    hi: np.ndarray | None = None


def unconstrained() -> ConstraintSet:
    return ConstraintSet(UNCONSTRAINED)


def budget_hyperplane() -> ConstraintSet:
    return ConstraintSet(BUDGET)


def long_only_simplex() -> ConstraintSet:
    return ConstraintSet(LONG_ONLY)


def box(lo, hi) -> ConstraintSet:
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise DimensionMismatch("box bounds must be 1-d arrays of equal length")
    if np.any(lo > hi):
        raise Infeasible("box bounds must satisfy lo <= hi")
    lo = lo.copy()
    hi = hi.copy()
    lo.setflags(write=False)
    hi.setflags(write=False)
    return ConstraintSet(BOX, lo=lo, hi=hi)


def project(cset: ConstraintSet, h) -> np.ndarray:
    """Euclidean projection onto the constraint set."""
    h = np.asarray(h, dtype=float)
    if cset.kind == UNCONSTRAINED:
        return h.copy()
    if cset.kind == BUDGET:
        return h - (h.sum() - 1.0) / h.size
    if cset.kind == LONG_ONLY:
        # Sort-and-threshold projection onto the unit simplex.
        u = np.sort(h)[::-1]
        cssv = np.cumsum(u)
        rho = np.nonzero(u * np.arange(1, h.size + 1) > (cssv - 1.0))[0][-1]
        theta = (cssv[rho] - 1.0) / (rho + 1.0)
        return np.clip(h - theta, 0.0, None)
    if cset.kind == BOX:
        if h.shape != cset.lo.shape:
            raise DimensionMismatch(f"h has shape {h.shape}, expected {cset.lo.shape}")
        return np.clip(h, cset.lo, cset.hi)
    raise ValueError(f"unknown constraint kind {cset.kind!r}")


def feasibility_violation(cset: ConstraintSet, h) -> float:
    h = np.asarray(h, dtype=float)
    return float(np.linalg.norm(project(cset, h) - h))


def normal_cone_residual(cset: ConstraintSet, h, g) -> float:
    """Euclidean distance from g to the normal cone of the set at h.

    Zero certifies optimality of h for any objective whose subgradient
    moment vector at h equals g. Raises Infeasible when h itself violates
    the set by more than the feasibility tolerance.
    """
    h = np.asarray(h, dtype=float)
    g = np.asarray(g, dtype=float)
    if g.shape != h.shape:
        raise DimensionMismatch("h and g must have equal shapes")
    if feasibility_violation(cset, h) > FEASIBILITY_TOL:
        raise Infeasible("h violates the constraint set beyond tolerance")
    if cset.kind == UNCONSTRAINED:
        return float(np.linalg.norm(g))
    if cset.kind == BUDGET:
        # Cone is the span of the ones vector.
        return float(np.linalg.norm(g - g.mean()))
    if cset.kind == LONG_ONLY:
        return _simplex_cone_distance(h, g)
    # Box: per-coordinate cones, interior {0}, faces half-lines.
    r = np.empty_like(g)
    tol = FEASIBILITY_TOL
    for i, gi in enumerate(g):
        lo_active = h[i] <= cset.lo[i] + tol
        hi_active = h[i] >= cset.hi[i] - tol
        if lo_active and hi_active:
            r[i] = 0.0
        elif lo_active:
            r[i] = max(gi, 0.0)
        elif hi_active:
            r[i] = max(-gi, 0.0)
        else:
            r[i] = gi
    return float(np.linalg.norm(r))


def _simplex_cone_distance(h: np.ndarray, g: np.ndarray) -> float:
    # N(h) = { lam * 1 - nu : nu >= 0, nu_i = 0 where h_i > 0 }. For fixed
    # lam the squared distance is sum over carried coordinates of
    # (g_i - lam)^2 plus sum over zero coordinates of max(g_i - lam, 0)^2,
    # a convex piecewise quadratic in lam; scan its breakpoints.
    carried = h > FEASIBILITY_TOL
    zero = ~carried
    gz = np.sort(g[zero])[::-1]
    candidates = []

    def dist_sq(lam: float) -> float:
        s = float(np.sum((g[carried] - lam) ** 2))
        s += float(np.sum(np.clip(g[zero] - lam, 0.0, None) ** 2))
        return s

    n_carried = int(carried.sum())
    base = float(g[carried].sum())
    # Prefix A of zero-coordinates with g_i above lam contributes to the
    # stationarity equation lam = (sum carried g + sum A g) / (count).
    for m in range(gz.size + 1):
        lam = (base + float(gz[:m].sum())) / (n_carried + m)
        upper = gz[m - 1] if m >= 1 else math.inf
        lower = gz[m] if m < gz.size else -math.inf
        if lower - 1e-12 <= lam <= upper + 1e-12:
            candidates.append(dist_sq(lam))
    if not candidates:  # numerical guard; breakpoints themselves
        candidates = [dist_sq(v) for v in gz]
    return math.sqrt(max(min(candidates), 0.0))


def support_function(cset: ConstraintSet, market: Market, q: Measure) -> float:
    """sup over admissible h of E_Q[v0 + h'dS], +inf when no face caps it.

    Q may have any nonnegative mass; the capital term contributes
    v0 * mass(Q). Unconstrained sets are bounded only at martingale-like Q
    (all asset moments zero); the budget hyperplane needs equal moments.
    """
    _check_len(q.density, market.space)
    wq = market.space.weights * q.density
    b = market.delta_s.T @ wq
    cash = market.v0 * float(wq.sum())
    if cset.kind == UNCONSTRAINED:
        return cash if float(np.max(np.abs(b))) <= _SUPPORT_TOL else math.inf
    if cset.kind == BUDGET:
        if float(b.max() - b.min()) > _SUPPORT_TOL:
            return math.inf
        return cash + float(b.mean())
    if cset.kind == LONG_ONLY:
        return cash + float(b.max())
    if cset.kind == BOX:
        if b.shape != cset.lo.shape:
            raise DimensionMismatch("box bounds do not match the asset count")
        return cash + float(cset.hi @ np.clip(b, 0.0, None) + cset.lo @ np.clip(b, None, 0.0))
    raise ValueError(f"unknown constraint kind {cset.kind!r}")
