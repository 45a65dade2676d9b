"""Finite scenario spaces, random variables on them, and measures.

A scenario space is a finite probability space (Omega, P) given by strictly
positive weights. Random variables and densities are plain vectors indexed
by scenario. All value objects are immutable; operations are free functions.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    LevelOutOfRange,
    NonPositiveWeight,
    NotNonnegative,
    NotNormalized,
)

# Input weights may miss exact normalization by this much; they are then
# renormalized to machine precision.
WEIGHT_SUM_TOL = 1e-9
# Total-mass slack when deciding whether a measure is a probability.
PROBABILITY_TOL = 1e-10


def _as_vector(values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionMismatch(f"{name} must be a nonempty 1-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise DimensionMismatch(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True, eq=False)
class ScenarioSpace:
    """Finite probability space with strictly positive scenario weights."""

    weights: np.ndarray

    def __post_init__(self):
        w = _as_vector(self.weights, "weights")
        if np.any(w <= 0.0):
            raise NonPositiveWeight("all scenario weights must be strictly positive")
        total = float(w.sum())
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise NotNormalized(f"weights sum to {total!r}, expected 1 within {WEIGHT_SUM_TOL}")
        w = w / total
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def k(self) -> int:
        return self.weights.size


def make_space(weights) -> ScenarioSpace:
    """Validate weights and build a scenario space (renormalizing tiny drift)."""
    return ScenarioSpace(np.asarray(weights, dtype=float))


@dataclass(frozen=True, eq=False)
class Rv:
    """Random variable: one real value per scenario."""

    values: np.ndarray

    def __post_init__(self):
        v = _as_vector(self.values, "values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def constant(cls, c: float, k: int) -> "Rv":
        return cls(np.full(k, float(c)))


@dataclass(frozen=True, eq=False)
class Measure:
    """Measure given by its density (Radon-Nikodym derivative) w.r.t. P.

    The density must be nonnegative; it need not integrate to one. Use
    :meth:`is_probability` to test for unit mass.
    """

    density: np.ndarray

    def __post_init__(self):
        d = _as_vector(self.density, "density")
        if np.any(d < 0.0):
            raise NotNonnegative("density entries must be nonnegative")
        d.setflags(write=False)
        object.__setattr__(self, "density", d)

    def mass(self, space: ScenarioSpace) -> float:
        _check_len(self.density, space)
        return float(space.weights @ self.density)

    def is_probability(self, space: ScenarioSpace) -> bool:
        return abs(self.mass(space) - 1.0) <= PROBABILITY_TOL


def _check_len(arr: np.ndarray, space: ScenarioSpace) -> None:
    if arr.size != space.k:
        raise DimensionMismatch(f"length {arr.size} does not match {space.k} scenarios")


def expectation(x: Rv, space: ScenarioSpace, q: Measure | None = None) -> float:
    """E_Q[X], defaulting to the base probability when no measure is given."""
    _check_len(x.values, space)
    if q is None:
        return float(space.weights @ x.values)
    _check_len(q.density, space)
    return float(space.weights @ (q.density * x.values))


def quantile(x: Rv, space: ScenarioSpace, u: float) -> float:
    """Left quantile F_X^{-1}(u): smallest atom value with F(x) >= u.

    Atoms are scanned in increasing order of value; no interpolation is
    performed, so the result is always one of the scenario values.
    """
    if not 0.0 < u < 1.0:
        raise LevelOutOfRange(f"quantile level must lie in (0, 1), got {u!r}")
    _check_len(x.values, space)
    order = np.argsort(x.values, kind="stable")
    cum = np.cumsum(space.weights[order])
    # cum[-1] can sit one ulp below 1; the slack keeps boundary levels exact.
    idx = int(np.searchsorted(cum, u - 1e-12, side="left"))
    idx = min(idx, space.k - 1)
    return float(x.values[order[idx]])
