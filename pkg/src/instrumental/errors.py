"""Exception hierarchy shared by all modules."""


class InstrumentalError(Exception):
    """Base class for errors raised by this package."""


class StructuralError(InstrumentalError, ValueError):
    """Shape/type problems in input data (wrong tensor shape, missing cell)."""


class ScenarioMismatchError(InstrumentalError, ValueError):
    """Two objects built for incompatible scenarios were combined."""


class UnsupportedScenarioError(InstrumentalError, ValueError):
    """Operation only defined for binary outcomes (or similar restriction)."""


class EnumerationCapError(InstrumentalError, ValueError):
    """A combinatorial enumeration would exceed the configured cap."""


class NonClassicalCorrelationError(InstrumentalError, ValueError):
    """An LP that requires classically-compatible input got an outside point."""


class SolverError(InstrumentalError, RuntimeError):
    """The LP backend failed to return a usable solution."""
