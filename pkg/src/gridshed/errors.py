"""Exception types shared across the simulator, environment and learner."""


class GridshedError(Exception):
    """Base class for all package-specific errors."""


class CaseValidationError(GridshedError):
    """Case data violates a structural invariant (bad ids, islanded buses, ...)."""


class SingularTopologyError(GridshedError):
    """The in-service network does not connect all buses."""


class PowerFlowDivergenceError(GridshedError):
    """Newton-Raphson failed to converge."""

    def __init__(self, message, mismatch=None, iterations=None):
        super().__init__(message)
        self.mismatch = mismatch
        self.iterations = iterations


class InitializationError(GridshedError):
    """Dynamic initialization failed (machine loading outside limits)."""


class VoltageCollapseError(GridshedError):
    """Algebraic network solve diverged during time stepping.

    Recoverable: the environment converts it into a terminal episode.
    """

    def __init__(self, message, time=None):
        super().__init__(message)
        self.time = time


class ScenarioRejectedError(GridshedError):
    """Scenario cannot be initialized (pre-fault power flow diverged)."""


class EpisodeFinishedError(GridshedError):
    """step() was called on a terminated episode."""


class TrainingDivergedError(GridshedError):
    """A non-finite value appeared during gradient descent."""


class ConfigError(GridshedError):
    """Malformed configuration or manifest input."""
