"""Exception types shared across the solver modules."""


class NpnsError(Exception):
    """Base class for all solver errors."""


class ShapeError(NpnsError):
    """Fields passed to an operation live on different grids."""


class OverflowGuardError(NpnsError):
    """An exponential argument exceeded the overflow guard.

    Exponentials of the potential are never clamped: a silently saturated
    e^(z*phi) would corrupt the energy bookkeeping, so we fail loudly.
    """

    def __init__(self, max_arg: float, limit: float):
        self.max_arg = max_arg
        self.limit = limit
        super().__init__(
            f"exponential argument max |z*phi| = {max_arg:.6g} exceeds guard {limit:g}"
        )


class SolverError(NpnsError):
    """A linear or nonlinear solve failed to converge.

    Carries the final residual, and for Newton solves the residual history.
    """

    def __init__(self, message: str, residual: float | None = None,
                 history: list | None = None):
        self.residual = residual
        self.history = history
        if residual is not None:
            message = f"{message} (residual {residual:.3e})"
        super().__init__(message)


class CflError(NpnsError):
    """A transport or flow step was attempted with an inadmissible dt."""

    def __init__(self, dt: float, admissible: float):
        self.dt = dt
        self.admissible = admissible
        super().__init__(
            f"dt = {dt:.6g} violates the CFL bound; admissible dt <= {admissible:.6g}"
        )


class PositivityError(NpnsError):
    """A concentration dipped below the tolerated floor; the step must be retried."""

    def __init__(self, species_index: int, min_value: float):
        self.species_index = species_index
        self.min_value = min_value
        super().__init__(
            f"species {species_index} reached min concentration {min_value:.6g}; "
            "step rejected"
        )


class FormatError(NpnsError):
    """A snapshot or timeseries file is malformed."""


class ConfigError(NpnsError):
    """A scenario configuration failed validation."""
