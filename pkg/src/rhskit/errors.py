"""Exception types raised across the toolkit."""


class RHSError(Exception):
    """Base class for toolkit errors."""


class ModeError(RHSError, ValueError):
    """An operation was called on a model configured for a different mode."""


class SingularChannelError(RHSError, ValueError):
    """Effective channel matrix lacks the rank needed for zero-forcing."""

    def __init__(self, rank, required):
        self.rank = rank
        self.required = required
        super().__init__(f"effective channel has rank {rank}, need {required}")


class ConstraintViolationError(RHSError, ValueError):
    """A beamformer violates one of its feasibility constraints."""

    def __init__(self, constraint, detail=""):
        self.constraint = constraint
        msg = f"constraint '{constraint}' violated"
        super().__init__(f"{msg}: {detail}" if detail else msg)


class InfeasibleError(RHSError, ValueError):
    """No feasible point exists for the requested problem."""


class DegenerateReceiverError(RHSError, ValueError):
    """Receive weighting collapses to zero."""


class ConvergenceError(RHSError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class ConfigError(RHSError, ValueError):
    """Experiment configuration failed to parse or validate."""
