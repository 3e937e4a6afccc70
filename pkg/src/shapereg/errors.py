"""Exception types shared across the engine.

Forward-model failures (blow-up, lost diffeomorphism, drift) are recoverable:
the sampler maps them to an infinite misfit instead of crashing the chain.
"""


class ShapeRegError(Exception):
    """Base class for all engine errors."""


class InputError(ShapeRegError):
    """Rejected input: non-finite values or malformed arguments."""


class ContractError(ShapeRegError):
    """A caller violated an internal contract (length mismatch, missing cache)."""


class DegenerateCurveError(ShapeRegError):
    """Curve tangent vanished; normals are undefined."""


class NonDiffeomorphismError(ShapeRegError):
    """Lie exponentiation produced a non-monotone circle map."""


class IntegrationAccuracyError(ShapeRegError):
    """Hamiltonian drift exceeded the configured tolerance."""


class BlowUpError(ShapeRegError):
    """Integration produced non-finite state."""


class ObservationFailure(ShapeRegError):
    """The forward observation could not be computed for this state."""


class ValidationError(ShapeRegError):
    """Configuration or prior parameters violate a named constraint."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
