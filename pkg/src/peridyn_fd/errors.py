"""Exception types; each maps to a CLI exit code."""


class PeridynError(Exception):
    exit_code = 1


class ConfigError(PeridynError, ValueError):
    exit_code = 2


class DomainError(PeridynError, ValueError):
    """Argument outside the mathematical domain of an operation."""
    exit_code = 2


class BlowUpError(PeridynError, FloatingPointError):
    exit_code = 3

    def __init__(self, step: int, msg: str = "non-finite values"):
        super().__init__(f"{msg} at step {step}")
        self.step = step


class NonconvergenceError(PeridynError, RuntimeError):
    exit_code = 4

    def __init__(self, step: int, iterations: int, contraction: float):
        super().__init__(
            f"fixed-point iteration did not converge at step {step} after {iterations} "
            f"iterations (contraction estimate dt*theta*Cbar/eps^2 = {contraction:.3g})"
        )
        self.step = step
        self.iterations = iterations
        self.contraction = contraction


class BoundViolation(PeridynError, AssertionError):
    exit_code = 5
