"""Exception taxonomy shared across the package.

Every error raised by library code derives from :class:`HedgekitError` so
callers (including the CLI) can map failures to a single domain-error path.
Parse failures get their own branch because they carry file positions and
map to a distinct process exit code.
"""


class HedgekitError(Exception):
    """Base class for all domain errors raised by hedgekit."""


class NonPositiveWeight(HedgekitError):
    """A scenario weight is zero or negative."""


class NotNormalized(HedgekitError):
    """Scenario weights do not sum to one within tolerance."""


class DimensionMismatch(HedgekitError):
    """Array lengths or shapes are inconsistent with the scenario space."""


class LevelOutOfRange(HedgekitError):
    """A quantile or tail level lies outside the open interval (0, 1)."""


class NotProbability(HedgekitError):
    """A measure expected to be a probability has the wrong total mass."""


class NotNonnegative(HedgekitError):
    """A density has negative entries."""


class NonConvexMeasure(HedgekitError):
    """Value-at-risk was passed where a convex risk measure is required."""


class SingularCovariance(HedgekitError):
    """A covariance matrix is not symmetric positive definite."""


class Infeasible(HedgekitError):
    """A point violates its constraint set beyond tolerance."""


class Unbounded(HedgekitError):
    """The hedging objective is unbounded below on the constraint set."""


class LpInfeasible(HedgekitError):
    """A linear program has an empty feasible region."""


class LpUnbounded(HedgekitError):
    """A linear program has unbounded optimal value."""


class NoEmm(HedgekitError):
    """No equivalent martingale measure exists for the market."""


class ParseError(HedgekitError):
    """A scenario file is malformed; the message carries row and column."""
