"""Exception types raised by the package."""

from __future__ import annotations


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConvergenceError(RuntimeError):
    """The implicit stage iteration failed to contract.

    Attributes:
        residual: Last max-norm update of the stage log-coordinates.
        iterations: Number of fixed-point sweeps performed.
        step_index: Index of the failing step inside a trajectory, if known.
    """

    def __init__(self, residual: float, iterations: int, step_index: int | None = None):
        self.residual = residual
        self.iterations = iterations
        self.step_index = step_index
        super().__init__(self._message())

    def _message(self) -> str:
        msg = (
            f"stage iteration did not converge after {self.iterations} sweeps "
            f"(last residual {self.residual:.3e}); step size likely too large"
        )
        if self.step_index is not None:
            msg = f"step {self.step_index}: " + msg
        return msg

    def at_step(self, step_index: int) -> "ConvergenceError":
        return ConvergenceError(self.residual, self.iterations, step_index)


class TableauParseError(ValueError):
    """Malformed tableau text, with 1-based line and column of the problem."""

    def __init__(self, message: str, line: int, column: int = 1):
        self.line = line
        self.column = column
        super().__init__(f"line {line}, column {column}: {message}")
