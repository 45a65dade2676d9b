"""Optimal hedging: minimize rho_u(dS h - dH) over a constraint set.

Two solver families:

* Parametric Gaussian book. When the vector of hedged increments is
  N(mu, Sigma) and positions live on the budget hyperplane, the pairs
  (neg_expectation, exponential(a)) and (entropic(a), identity) share the
  mean-variance solution

      h = (lam Sigma^-1 1 + Sigma^-1 mu) / a,
      lam = (a - 1'Sigma^-1 mu) / (1'Sigma^-1 1),

  and (expected_shortfall(alpha), exponential(a)) has the closed-form
  objective evaluated by :func:`gaussian_es_exp_objective`, minimized
  numerically with its analytic gradient.

* Scenario solver. Projected subgradient descent (step c/sqrt(t), seeded
  multistart) followed by a projected-gradient polish with backtracking;
  piecewise-linear objectives (neg_expectation or expected shortfall with
  affine or shortfall utility) route to an exact linear program instead.

Optimality is certified through the normal cone: with Q a subgradient
measure at the hedged position and g_i = E_Q[dS_i], the point h is optimal
iff g lies in the normal cone of the constraint set at h; the reported
residual is the distance to that cone, zero at certified optima.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.stats import norm

from .errors import (
    DimensionMismatch,
    Infeasible,
    LevelOutOfRange,
    LpInfeasible,
    LpUnbounded,
    SingularCovariance,
    Unbounded,
)
from .market import (
    BOX,
    BUDGET,
    LONG_ONLY,
    UNCONSTRAINED,
    ConstraintSet,
    Market,
    hedged_position,
    normal_cone_residual,
    project,
    support_function,
)
from .preference import (
    AFFINE,
    SHORTFALL,
    ComposedPreference,
    rho_u_eval,
    rho_u_penalty,
    rho_u_subgradient,
)
from .riskmeasures import ENTROPIC, EXPECTED_SHORTFALL, NEG_EXPECTATION
from .scenario import Measure, Rv
from . import simplexlp


@dataclass(frozen=True, eq=False)
class GaussianMarket:
    """Gaussian law N(mu, Sigma) of the hedged price increments."""

    mu: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        mu = np.asarray(self.mu, dtype=float)
        sig = np.asarray(self.sigma, dtype=float)
        if mu.ndim != 1 or sig.shape != (mu.size, mu.size):
            raise DimensionMismatch(
                f"mu has shape {mu.shape}, sigma has shape {sig.shape}"
            )
        if float(np.max(np.abs(sig - sig.T))) > 1e-12:
            raise SingularCovariance("sigma must be symmetric within 1e-12")
        eigmin = float(np.linalg.eigvalsh(sig).min())
        if eigmin <= 1e-10:
            raise SingularCovariance(f"sigma must be positive definite, min eig {eigmin!r}")
        mu = mu.copy()
        sig = sig.copy()
        mu.setflags(write=False)
        sig.setflags(write=False)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "sigma", sig)

    @property
    def n_assets(self) -> int:
        return self.mu.size


@dataclass(frozen=True, eq=False)
class HedgeSolution:
    h: np.ndarray
    value: float
    multiplier: float | None
    witness: Measure | None
    residual: float


@dataclass(frozen=True, eq=False)
class OptimalityCheck:
    residual: float
    multiplier: float | None
    witness: Measure


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 50_000
    step_c: float = 1.0
    tol_residual: float = 1e-6
    seed: int = 0
    multistarts: int = 8
    lower_guard: float = -1e12
    method: str = "auto"  # auto | lp | subgradient
    probe_iter: int = 800


# ---------------------------------------------------------------------------
# Gaussian closed forms.
# ---------------------------------------------------------------------------

def _pref_aversion(pref: ComposedPreference) -> float:
    """Risk aversion of the mean-variance reduction implied by a pair."""
    rho, u = pref.rho, pref.u
    if rho.kind == NEG_EXPECTATION and u.kind == "exponential":
        return u.a
    if rho.kind == ENTROPIC and u.kind == AFFINE:
        return rho.a * u.b
    raise LevelOutOfRange(
        "gaussian mean-variance form needs (neg_expectation, exponential) "
        "or (entropic, affine)"
    )


def solve_gaussian_meanvar(
    gm: GaussianMarket, a: float, pref: ComposedPreference | None = None
) -> HedgeSolution:
    """Budget-constrained closed form shared by the two smooth pairs.

    Reported value: -h'mu + a h'Sigma h / 2 when no preference is supplied
    (the entropic/identity certainty equivalent), otherwise the composed
    objective of the given pair. The multiplier is the budget KKT value,
    satisfying a Sigma h - mu = lam 1 exactly.
    """
    if not a > 0.0:
        raise LevelOutOfRange(f"risk aversion must be positive, got {a!r}")
    if pref is not None:
        implied = _pref_aversion(pref)
        if abs(implied - a) > 1e-12 * (1.0 + abs(a)):
            raise LevelOutOfRange(
                f"preference implies aversion {implied!r}, got a={a!r}"
            )
    ones = np.ones(gm.n_assets)
    si1 = np.linalg.solve(gm.sigma, ones)
    simu = np.linalg.solve(gm.sigma, gm.mu)
    lam = (a - float(ones @ simu)) / float(ones @ si1)
    h = (lam * si1 + simu) / a
    quad = -float(h @ gm.mu) + 0.5 * a * float(h @ gm.sigma @ h)
    if pref is None:
        value = quad
    elif pref.rho.kind == NEG_EXPECTATION:
        value = math.exp(a * quad) - 1.0
    else:  # entropic with affine utility: rescale and shift
        b = pref.u.b
        value = -pref.u.a + b * (
            -float(h @ gm.mu) + 0.5 * pref.rho.a * b * float(h @ gm.sigma @ h)
        )
    residual = float(np.linalg.norm(a * (gm.sigma @ h) - gm.mu - lam * ones))
    return HedgeSolution(h=h, value=value, multiplier=lam, witness=None, residual=residual)


def _check_budget(gm: GaussianMarket, h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape != (gm.n_assets,):
        raise DimensionMismatch(f"h has shape {h.shape}, expected ({gm.n_assets},)")
    if abs(float(h.sum()) - 1.0) > 1e-8:
        raise Infeasible("gaussian objectives are defined on the budget hyperplane")
    return h


def gaussian_es_exp_objective(h, gm: GaussianMarket, a: float, alpha: float) -> float:
    """Expected shortfall of exponential utility under a Gaussian book.

    With h'(increments) ~ N(m, s^2), m = h'mu, s^2 = h'Sigma h,

        value = exp(-a m + a^2 s^2 / 2) Phi(Phi^-1(alpha) + a s) / alpha - 1.

    The sign inside Phi follows from substituting the Gaussian quantile
    into the tail average of u; the small-a limit of value/a recovers the
    mean-variance-like expression -m + s phi(Phi^-1(alpha)) / alpha.
    """
    h = _check_budget(gm, h)
    m = float(h @ gm.mu)
    s = math.sqrt(float(h @ gm.sigma @ h))
    z = norm.ppf(alpha)
    arg = -a * m + 0.5 * a * a * s * s
    if arg > 700.0:  # exp overflow; the objective is effectively infinite
        return math.inf
    return math.exp(arg) * norm.cdf(z + a * s) / alpha - 1.0


def gaussian_es_exp_gradient(h, gm: GaussianMarket, a: float, alpha: float) -> np.ndarray:
    h = _check_budget(gm, h)
    m = float(h @ gm.mu)
    sh = gm.sigma @ h
    s = math.sqrt(float(h @ sh))
    z = norm.ppf(alpha)
    e = math.exp(min(-a * m + 0.5 * a * a * s * s, 700.0))
    big_phi = norm.cdf(z + a * s)
    small_phi = norm.pdf(z + a * s)
    return (e / alpha) * (big_phi * (-a * gm.mu + a * a * sh) + small_phi * a * sh / s)


def solve_gaussian_es_exp(
    gm: GaussianMarket, a: float, alpha: float, opts: SolverOptions | None = None
) -> HedgeSolution:
    """Minimize the Gaussian shortfall-of-exponential objective on the
    budget hyperplane by projected gradient with backtracking."""
    opts = opts or SolverOptions()
    n = gm.n_assets
    rng = np.random.default_rng(opts.seed)
    ones = np.ones(n)

    def proj(v):
        return v - (v.sum() - 1.0) / n

    def fval(v):
        return gaussian_es_exp_objective(v, gm, a, alpha)

    starts = [ones / n] + [proj(rng.normal(size=n)) for _ in range(max(opts.multistarts - 1, 0))]
    best = None
    for h in starts:
        s = 1.0
        for _ in range(5_000):
            grad = gaussian_es_exp_gradient(h, gm, a, alpha)
            gproj = grad - grad.mean()
            if float(np.linalg.norm(gproj)) <= 1e-10:
                break
            fh = fval(h)
            moved = False
            while s > 1e-18:
                h_try = proj(h - s * grad)
                dh = h_try - h
                if fval(h_try) <= fh + float(grad @ dh) + float(dh @ dh) / (2 * s) + 1e-15:
                    h = h_try
                    s = min(s * 1.5, 1e6)
                    moved = True
                    break
                s *= 0.5
            if not moved:
                break
        cand = (fval(h), tuple(h), h)
        if best is None or cand[:2] < best[:2]:
            best = cand
    h = best[2]
    grad = gaussian_es_exp_gradient(h, gm, a, alpha)
    residual = float(np.linalg.norm(grad - grad.mean()))
    return HedgeSolution(
        h=h, value=best[0], multiplier=float(grad.mean()), witness=None, residual=residual
    )


# ---------------------------------------------------------------------------
# Scenario solver.
# ---------------------------------------------------------------------------

def _moment_vector(market: Market, q: Measure) -> np.ndarray:
    return market.delta_s.T @ (market.space.weights * q.density)


def _eval_and_moment(pref, market, h):
    pos = hedged_position(market, h)
    q = rho_u_subgradient(pref, pos, market.space)
    return rho_u_eval(pref, pos, market.space), q, _moment_vector(market, q)


def _is_piecewise_linear(pref: ComposedPreference) -> bool:
    return pref.rho.kind in (NEG_EXPECTATION, EXPECTED_SHORTFALL) and pref.u.kind in (
        AFFINE,
        SHORTFALL,
    )


def _barycenter(cset: ConstraintSet, n: int) -> np.ndarray:
    if cset.kind in (BUDGET, LONG_ONLY):
        return np.ones(n) / n
    if cset.kind == BOX:
        return 0.5 * (cset.lo + cset.hi)
    return np.zeros(n)


def solve_numeric(
    pref: ComposedPreference,
    market: Market,
    cset: ConstraintSet,
    opts: SolverOptions | None = None,
) -> HedgeSolution:
    """Minimize the composed risk of the hedged book over the set.

    method="auto" routes piecewise-linear objectives to an exact linear
    program and everything else to seeded multistart projected subgradient
    descent with a smooth polish. Deterministic for a fixed seed; the
    multistart merge orders candidates by (value, lexicographic h), so the
    result does not depend on evaluation order. Raises Unbounded when the
    objective dives below the lower guard (market irrelevance for the set).
    """
    opts = opts or SolverOptions()
    if cset.kind == BOX and cset.lo.size != market.n_assets:
        raise DimensionMismatch("box bounds do not match the asset count")
    if opts.method == "lp" or (opts.method == "auto" and _is_piecewise_linear(pref)):
        if not _is_piecewise_linear(pref):
            raise LevelOutOfRange("lp method requires a piecewise-linear preference")
        return _solve_lp(pref, market, cset)
    return _solve_subgradient(pref, market, cset, opts)


def _finalize(pref, market, cset, h) -> HedgeSolution:
    value, q, g = _eval_and_moment(pref, market, h)
    residual = normal_cone_residual(cset, h, g)
    multiplier = float(g.mean()) if cset.kind == BUDGET else None
    return HedgeSolution(h=h, value=value, multiplier=multiplier, witness=q, residual=residual)


def verify_optimality(
    pref: ComposedPreference, market: Market, cset: ConstraintSet, h
) -> OptimalityCheck:
    """Normal-cone certificate at h: residual, budget multiplier, witness.

    The witness Q is the chain-rule subgradient measure at the hedged
    position; the residual is the distance from g_i = E_Q[dS_i] to the
    normal cone at h. For the budget hyperplane the multiplier mean(g)
    solves the one-dimensional stationarity system exactly at optima.
    """
    h = np.asarray(h, dtype=float)
    _, q, g = _eval_and_moment(pref, market, h)
    residual = normal_cone_residual(cset, h, g)
    multiplier = float(g.mean()) if cset.kind == BUDGET else None
    return OptimalityCheck(residual=residual, multiplier=multiplier, witness=q)


def problem_penalty(
    pref: ComposedPreference, market: Market, cset: ConstraintSet, q: Measure
) -> float:
    """Penalty of the hedging value functional: composed penalty plus the
    support function of the admissible book values."""
    pen = rho_u_penalty(pref, q, market.space)
    if math.isinf(pen):
        return math.inf
    sup = support_function(cset, market, q)
    return math.inf if math.isinf(sup) else pen + sup


def _solve_subgradient(pref, market, cset, opts: SolverOptions) -> HedgeSolution:
    n = market.n_assets
    rng = np.random.default_rng(opts.seed)
    starts = [_barycenter(cset, n)]
    for _ in range(max(opts.multistarts - 1, 0)):
        starts.append(project(cset, rng.normal(size=n)))

    # Hedging against an irrelevant market diverges. Decaying subgradient
    # steps cannot reach the guard level in any realistic budget, so scan
    # doubling radii along projected descent rays instead; sixty doublings
    # cover 1e18, which crosses the guard for any linear decay. Compact
    # sets are always bounded.
    probe = cset.kind in (UNCONSTRAINED, BUDGET) and opts.probe_iter > 0
    if probe:
        for h0 in starts:
            _ray_probe(pref, market, cset, h0, opts.lower_guard)

    coarse_iter = min(opts.max_iter, 1_500)
    best = None
    for h0 in starts:
        h, v = _descend(pref, market, cset, h0, coarse_iter, opts.step_c, opts.lower_guard)
        cand = (v, tuple(h), h)
        if best is None or cand[:2] < best[:2]:
            best = cand

    if probe:
        _ray_probe(pref, market, cset, best[2], opts.lower_guard)
    h = _polish(pref, market, cset, best[2], opts)
    return _finalize(pref, market, cset, h)


def _ray_probe(pref, market, cset, h0, lower_guard):
    # The value-function subgradient at h is -g, so +g points downhill.
    h0 = np.asarray(h0, dtype=float)
    _, _, g = _eval_and_moment(pref, market, h0)
    d = g.copy()
    if cset.kind == BUDGET:
        d = d - d.mean()
    nd = float(np.linalg.norm(d))
    if nd <= 1e-14:
        return
    d = d / nd
    prev = None
    t = 1.0
    with np.errstate(all="ignore"):
        for _ in range(64):
            v, _, _ = _eval_and_moment(pref, market, h0 + t * d)
            if v < lower_guard:
                raise Unbounded(
                    "objective dives below the lower guard along a descent ray"
                )
            if not math.isfinite(v):
                return
            # Convex along the ray: once the decrease stalls it never resumes.
            if prev is not None and v >= prev - 1e-15 * (1.0 + abs(prev)):
                return
            prev = v
            t *= 2.0


def _descend(pref, market, cset, h0, iters, step_c, lower_guard):
    h = project(cset, np.asarray(h0, dtype=float))
    best_h, best_v = h, None
    for t in range(1, iters + 1):
        value, _, g = _eval_and_moment(pref, market, h)
        if best_v is None or value < best_v:
            best_v, best_h = value, h
        if best_v < lower_guard:
            raise Unbounded("objective fell below the lower guard; irrelevant market")
        grad = -g
        norm_g = float(np.linalg.norm(grad))
        if norm_g <= 1e-14:
            break
        h = project(cset, h - (step_c / math.sqrt(t)) * grad / norm_g)
    value, _, _ = _eval_and_moment(pref, market, h)
    if value < best_v:
        best_v, best_h = value, h
    return best_h, best_v


def _polish(pref, market, cset, h, opts: SolverOptions):
    """Projected gradient with backtracking from the incumbent. Converges
    fast on smooth objectives; on kinks the line search stalls and the
    incumbent is kept."""
    target = min(opts.tol_residual * 0.1, 1e-7)
    cap = max(2_000, min(opts.max_iter, 20_000))
    s = 1.0
    fh, _, g = _eval_and_moment(pref, market, h)
    for _ in range(cap):
        if normal_cone_residual(cset, h, g) <= target:
            break
        if fh < opts.lower_guard:
            raise Unbounded("objective fell below the lower guard; irrelevant market")
        grad = -g
        moved = False
        while s > 1e-18:
            h_try = project(cset, h - s * grad)
            dh = h_try - h
            if float(np.linalg.norm(dh)) <= 1e-16:
                break
            f_try, _, g_try = _eval_and_moment(pref, market, h_try)
            if f_try <= fh + float(grad @ dh) + float(dh @ dh) / (2 * s) + 1e-15:
                h, fh, g = h_try, f_try, g_try
                s = min(s * 1.5, 1e6)
                moved = True
                break
            s *= 0.5
        if not moved:
            break
    return h


# ---------------------------------------------------------------------------
# Exact linear programming route for piecewise-linear objectives.
# ---------------------------------------------------------------------------

def _set_rows(cset: ConstraintSet, n: int, total: int):
    """Equality/inequality rows pinning the h block inside the LP."""
    a_eq = b_eq = None
    a_ub_rows, b_ub_vals = [], []
    h_free = cset.kind != LONG_ONLY
    if cset.kind in (BUDGET, LONG_ONLY):
        row = np.zeros(total)
        row[:n] = 1.0
        a_eq, b_eq = row[None, :], np.array([1.0])
    elif cset.kind == BOX:
        for i in range(n):
            up = np.zeros(total)
            up[i] = 1.0
            a_ub_rows.append(up)
            b_ub_vals.append(float(cset.hi[i]))
            dn = np.zeros(total)
            dn[i] = -1.0
            a_ub_rows.append(dn)
            b_ub_vals.append(-float(cset.lo[i]))
    return a_eq, b_eq, a_ub_rows, b_ub_vals, h_free


def _solve_lp(pref, market, cset) -> HedgeSolution:
    k, n = market.space.k, market.n_assets
    w = market.space.weights
    ds = market.delta_s
    dh = market.delta_claim
    rho, u = pref.rho, pref.u
    rows, rhs = [], []

    if rho.kind == NEG_EXPECTATION and u.kind == AFFINE:
        total = n
        c = np.zeros(total)
        c[:n] = -u.b * (ds.T @ w)
        free = np.zeros(total, dtype=bool)
    elif rho.kind == NEG_EXPECTATION and u.kind == SHORTFALL:
        # h block, then s_w >= max(-position, 0); minimize E[s].
        total = n + k
        c = np.zeros(total)
        c[n:] = w
        free = np.zeros(total, dtype=bool)
        for i in range(k):
            row = np.zeros(total)
            row[:n] = -ds[i]
            row[n + i] = -1.0
            rows.append(row)
            rhs.append(-dh[i])
    elif rho.kind == EXPECTED_SHORTFALL and u.kind == AFFINE:
        # Variational tail form: minimize -t + E[(t - position)^+]/alpha,
        # scaled by the utility slope.
        total = n + 1 + k
        c = np.zeros(total)
        c[n] = -u.b
        c[n + 1 :] = (u.b / rho.alpha) * w
        free = np.zeros(total, dtype=bool)
        free[n] = True
        for i in range(k):
            row = np.zeros(total)
            row[:n] = -ds[i]
            row[n] = 1.0
            row[n + 1 + i] = -1.0
            rows.append(row)
            rhs.append(-dh[i])
    else:  # expected shortfall of the shortfall utility
        total = n + 1 + 2 * k
        c = np.zeros(total)
        c[n] = -1.0
        c[n + 1 + k :] = w / rho.alpha
        free = np.zeros(total, dtype=bool)
        free[n] = True
        for i in range(k):
            row = np.zeros(total)  # s_w >= -position_w
            row[:n] = -ds[i]
            row[n + 1 + i] = -1.0
            rows.append(row)
            rhs.append(-dh[i])
            row = np.zeros(total)  # r_w >= t + s_w
            row[n] = 1.0
            row[n + 1 + i] = 1.0
            row[n + 1 + k + i] = -1.0
            rows.append(row)
            rhs.append(0.0)

    a_eq, b_eq, set_rows, set_rhs, h_free = _set_rows(cset, n, total)
    rows.extend(set_rows)
    rhs.extend(set_rhs)
    if h_free:
        free[:n] = True
    a_ub = np.vstack(rows) if rows else None
    b_ub = np.asarray(rhs) if rows else None
    try:
        res = simplexlp.solve_general(c, a_ub=a_ub, b_ub=b_ub, a_eq=a_eq, b_eq=b_eq, free=free)
    except LpUnbounded as exc:
        raise Unbounded("hedging objective unbounded below; irrelevant market") from exc
    except LpInfeasible as exc:  # constraint sets here are never empty
        raise Infeasible("constraint rows are inconsistent") from exc
    h = project(cset, res.x[:n])
    return _finalize(pref, market, cset, h)
