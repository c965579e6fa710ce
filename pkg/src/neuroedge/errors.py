"""Exception hierarchy shared across the simulator."""


class NeuroedgeError(Exception):
    """Base class for all neuroedge errors."""


class DimensionMismatch(NeuroedgeError, ValueError):
    """Operand shapes are incompatible with the requested operation."""


class SingularSystem(NeuroedgeError, ArithmeticError):
    """A linear system required by a solver is rank-deficient."""


class NotStabilizable(NeuroedgeError, ArithmeticError):
    """No stabilizing initial gain could be constructed for the Riccati iteration."""


class NoConvergence(NeuroedgeError, ArithmeticError):
    """An iterative solver exhausted its iteration budget."""


class InvalidDimension(NeuroedgeError, ValueError):
    """A network or scenario dimension is out of its admissible range."""


class NonFiniteState(NeuroedgeError, FloatingPointError):
    """A simulated state became NaN or infinite."""


class InsideObstacle(NeuroedgeError, RuntimeError):
    """The controlled plant penetrated an obstacle surface (collision)."""


class MalformedMessage(NeuroedgeError, ValueError):
    """A link message failed to decode (bad frame, bad JSON, unknown kind, wrong arity)."""


class DegenerateTarget(NeuroedgeError, ZeroDivisionError):
    """A normalized metric was requested against an identically-zero target."""


class ParseError(NeuroedgeError, ValueError):
    """A configuration file could not be parsed."""


class ValidationError(NeuroedgeError, ValueError):
    """A configuration violated one or more invariants."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class IoError(NeuroedgeError, OSError):
    """A telemetry file could not be written."""
