"""Exception types shared across the package."""

from __future__ import annotations


class ValidationError(ValueError):
    """Malformed or inconsistent input."""


class UnstablePotentialError(ValueError):
    """Some squared frequency is negative (or zero where a ground state is needed)."""

    def __init__(self, message: str, omega_sq=()):
        super().__init__(message)
        self.omega_sq = tuple(float(w) for w in omega_sq)


class NotPairDecoupledError(ValidationError):
    def __init__(self, i: int, j: int, value: float):
        super().__init__(f"not pair-decoupled: coupling d_({i},{j}) = {value!r} lies outside the pairing")
        self.pair = (i, j)
        self.value = value


class ConvergenceError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual
