"""Dense two-phase simplex solver with Bland's rule.

Small, exact, and deterministic; intended for desk-scale programs (a few
hundred rows). Bland's pivoting rule trades speed for a termination
guarantee on the degenerate programs that hedging and pricing generate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LpInfeasible, LpUnbounded

PIVOT_TOL = 1e-9
_PHASE1_TOL = 1e-7
_MAX_PIVOTS = 200_000


@dataclass(frozen=True)
class LpResult:
    x: np.ndarray
    value: float


def _pivot(tab: np.ndarray, basis: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    for r in range(tab.shape[0]):
        if r != row and abs(tab[r, col]) > 0.0:
            tab[r] -= tab[r, col] * tab[row]
    basis[row] = col


def _run_simplex(tab: np.ndarray, basis: np.ndarray, ncols: int) -> None:
    # Objective row is tab[-1]; reduced costs in tab[-1, :ncols]. Bland:
    # enter the lowest-index improving column, leave by min ratio with the
    # lowest basis index breaking ties.
    m = tab.shape[0] - 1
    for _ in range(_MAX_PIVOTS):
        red = tab[-1, :ncols]
        enter = -1
        for j in range(ncols):
            if red[j] < -PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return
        col = tab[:m, enter]
        best_row, best_ratio = -1, np.inf
        for i in range(m):
            if col[i] > PIVOT_TOL:
                ratio = tab[i, -1] / col[i]
                if ratio < best_ratio - 1e-12 or (
                    abs(ratio - best_ratio) <= 1e-12
                    and (best_row < 0 or basis[i] < basis[best_row])
                ):
                    best_row, best_ratio = i, ratio
        if best_row < 0:
            raise LpUnbounded("objective decreases without bound")
        _pivot(tab, basis, best_row, enter)
    raise LpInfeasible("pivot limit exceeded; numerically stalled program")


def solve_standard(c: np.ndarray, a: np.ndarray, b: np.ndarray) -> LpResult:
    """min c'x subject to a x = b, x >= 0."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float).copy()
    c = np.asarray(c, dtype=float)
    m, n = a.shape
    a = a.copy()
    neg = b < 0.0
    a[neg] *= -1.0
    b[neg] *= -1.0

    # Phase 1: artificial basis, minimize the artificial mass.
    tab = np.zeros((m + 1, n + m + 1))
    tab[:m, :n] = a
    tab[:m, n : n + m] = np.eye(m)
    tab[:m, -1] = b
    tab[-1, :n] = -a.sum(axis=0)
    tab[-1, -1] = -b.sum()
    basis = np.arange(n, n + m)
    _run_simplex(tab, basis, n + m)
    if tab[-1, -1] < -_PHASE1_TOL:
        raise LpInfeasible("constraints admit no nonnegative solution")

    # Drive any artificial still basic out of the basis, or drop its
    # (redundant) row when no real pivot exists.
    keep = np.ones(m, dtype=bool)
    for i in range(m):
        if basis[i] >= n:
            found = -1
            for j in range(n):
                if abs(tab[i, j]) > PIVOT_TOL:
                    found = j
                    break
            if found >= 0:
                _pivot(tab, basis, i, found)
            else:
                keep[i] = False
    rows = np.concatenate([np.nonzero(keep)[0], [m]])
    tab = tab[rows][:, np.concatenate([np.arange(n), [n + m]])]
    basis = basis[keep]
    m2 = basis.size

    # Phase 2: rebuild reduced costs for the real objective.
    cb = c[basis]
    tab[-1, :n] = cb @ tab[:m2, :n] - c
    tab[-1, -1] = cb @ tab[:m2, -1]
    # Sign convention: maintain tab[-1, j] = c_B' B^-1 A_j - c_j, improve
    # while some entry is positive. Negate to reuse the minimizing loop.
    tab[-1] *= -1.0
    _run_simplex(tab, basis, n)

    x = np.zeros(n)
    for i in range(m2):
        x[basis[i]] = tab[i, -1]
    return LpResult(x=x, value=float(c @ x))


def solve_general(
    c: np.ndarray,
    a_ub: np.ndarray | None = None,
    b_ub: np.ndarray | None = None,
    a_eq: np.ndarray | None = None,
    b_eq: np.ndarray | None = None,
    free: np.ndarray | None = None,
) -> LpResult:
    """min c'x with a_ub x <= b_ub, a_eq x = b_eq.

    Variables are nonnegative unless flagged in ``free``; free variables
    are split into positive and negative parts internally.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    free = np.zeros(n, dtype=bool) if free is None else np.asarray(free, dtype=bool)
    blocks_a, blocks_b = [], []
    if a_ub is not None:
        blocks_a.append(np.asarray(a_ub, dtype=float))
        blocks_b.append(np.asarray(b_ub, dtype=float))
    if a_eq is not None:
        blocks_a.append(np.asarray(a_eq, dtype=float))
        blocks_b.append(np.asarray(b_eq, dtype=float))
    if not blocks_a:
        # Nothing binds: the origin is optimal unless some coordinate can
        # be pushed with negative cost.
        if np.any(c < 0.0) or np.any(c[free] != 0.0):
            raise LpUnbounded("objective decreases without bound")
        return LpResult(x=np.zeros(n), value=0.0)
    a_all = np.vstack(blocks_a)
    b_all = np.concatenate(blocks_b)
    n_ub = 0 if a_ub is None else blocks_a[0].shape[0]

    nf = int(free.sum())
    cols = n + nf + n_ub
    a_std = np.zeros((a_all.shape[0], cols))
    a_std[:, :n] = a_all
    a_std[:, n : n + nf] = -a_all[:, free]
    if n_ub:
        a_std[:n_ub, n + nf :] = np.eye(n_ub)
    c_std = np.zeros(cols)
    c_std[:n] = c
    c_std[n : n + nf] = -c[free]

    res = solve_standard(c_std, a_std, b_all)
    x = res.x[:n].copy()
    x[free] -= res.x[n : n + nf]
    return LpResult(x=x, value=float(c @ x))
