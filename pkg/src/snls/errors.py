"""Exception types shared across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class ConfigError(ValueError):
    """A run configuration is malformed; the message names the offending key."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"config error on {key!r}: {message}")


class SolverDivergenceError(RuntimeError):
    """The implicit Crank-Nicolson solve did not converge.

    Carries the last iterate change (`residual`), the number of iterations
    spent, and, when raised from a trajectory loop, the failing step index.
    """

    def __init__(self, residual: float, iterations: int, step_index: int | None = None):
        self.residual = residual
        self.iterations = iterations
        self.step_index = step_index
        where = f" at step {step_index}" if step_index is not None else ""
        super().__init__(
            f"implicit solver did not converge{where}: "
            f"residual {residual:.3e} after {iterations} iterations"
        )


class ExperimentError(RuntimeError):
    """A Monte Carlo experiment could not produce a valid table."""
