"""Shared exception and warning types."""


class HbmError(Exception):
    """Base class for errors raised by this package."""


class ConvergenceError(HbmError):
    """An iterative solver exhausted its budget without converging."""


class InsufficientData(HbmError):
    """Not enough demonstration data for the requested identification."""


class NotStabilizing(HbmError):
    """A gain expected to stabilize the plant does not."""


class SolverFailure(HbmError):
    """The optimization method stalled or produced an invalid iterate."""


class Infeasible(HbmError):
    """A feasibility problem has no solution within the search bounds."""


class UnstableRollout(HbmError):
    """A simulated episode diverged far outside the position domain."""


class RankDeficientWarning(UserWarning):
    """Stacked state data has rank below the state dimension."""


class DegenerateDataWarning(UserWarning):
    """All data points coincide; mixture collapsed to the regularization floor."""


class FarFieldWarning(UserWarning):
    """All mixture components underflowed at the query; weights fell back to uniform."""
