"""Exception types shared across the package."""


class CptPsaError(Exception):
    """Base class for all package-specific errors."""


class SolverError(CptPsaError):
    """Base class for numerical-solver failures."""


class SingularSystemError(SolverError):
    """A linear system that should be uniquely solvable is (numerically) singular.

    Raised by the steady-state and sideband solvers when the relaxation
    configuration leaves a degenerate null space (e.g. all decay rates zero)
    or when a drive frequency hits an undamped mode.
    """


class StepFailureError(SolverError):
    """The adaptive time stepper could not meet the requested tolerance."""


class ConvergenceFailureError(SolverError):
    """Grid refinement did not stabilize a propagation result."""


class FitFailureError(SolverError):
    """A model fit ended with a residual above the configured bound."""


class ConfigError(CptPsaError):
    """A configuration file failed to parse or validate."""
