"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Bad dimensions, parameters, schedules or experiment configs."""


class DomainError(ValueError):
    """An argument lies outside the domain of a theory function."""


class InfeasibleRadiusError(ValueError):
    """The ball ``||y - Ax|| <= r`` does not meet the box."""

    def __init__(self, r, min_residual):
        self.r = float(r)
        self.min_residual = float(min_residual)
        super().__init__(
            f"radius r={self.r:.6g} is infeasible; the smallest residual "
            f"achievable over the box is {self.min_residual:.6g}"
        )


class InnerSolverError(RuntimeError):
    """A box-constrained inner solve ran out of iterations."""

    def __init__(self, message, best_x=None, kkt_residual=float("nan"), iteration=None):
        self.best_x = best_x
        self.kkt_residual = float(kkt_residual)
        self.iteration = iteration
        super().__init__(message)


class DatasetError(RuntimeError):
    """The bundled parameter tables could not be loaded or failed integrity checks."""
