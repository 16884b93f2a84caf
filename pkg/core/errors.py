"""Exception hierarchy for the wavesheet simulator.

Input problems derive from ValueError so callers that only know about the
builtin types still catch them; numerical breakdowns derive from RuntimeError.
"""


class WaveSheetError(Exception):
    """Base class for every error raised by the simulator."""


class DegenerateCurveError(WaveSheetError, ValueError):
    """A curve has coincident adjacent nodes or a vanishing tangent."""

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class SingularKernelError(WaveSheetError, ValueError):
    """A periodic kernel was evaluated on the lattice {kL}."""


class CompatibilityError(WaveSheetError, ValueError):
    """Normal-velocity data violates the zero-flux compatibility condition."""


class ConfigurationError(WaveSheetError, ValueError):
    """Settings are inconsistent with each other or with the formulation."""


class DomainError(WaveSheetError, ValueError):
    """A special-function argument is outside its domain."""


class NoRootError(WaveSheetError, ValueError):
    """A bracketing root search found no sign change."""

    def __init__(self, message: str, residuals: tuple[float, float] = (float("nan"), float("nan"))):
        super().__init__(message)
        self.residuals = residuals


class ProximityError(WaveSheetError, ValueError):
    """A point vortex came too close to a sheet or to another vortex."""


class FactorizationError(WaveSheetError, RuntimeError):
    """A dense factorization found a (numerically) singular matrix."""


class NeumannDivergenceError(WaveSheetError, RuntimeError):
    """A Neumann-type fixed point failed to converge."""

    def __init__(self, message: str, trace: list[float] | None = None):
        super().__init__(message)
        self.trace = list(trace or [])


class FixedPointError(WaveSheetError, RuntimeError):
    """The Verlet relaxation did not settle within its iteration budget."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class GeometryDegenerationError(WaveSheetError, RuntimeError):
    """Node spacing collapsed during time stepping."""
