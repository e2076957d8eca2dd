"""Exception hierarchy shared by all dgdtrack modules."""


class DgdTrackError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DgdTrackError, ValueError):
    """An argument is outside its admissible range or violates a precondition."""


class LogicError(DgdTrackError, RuntimeError):
    """Calls arrived in an inconsistent order or with mismatched shapes."""


class NumericalError(DgdTrackError, ArithmeticError):
    """A numerical self-check failed (residual gate, invariant violation)."""


class TheoryDegeneracyError(DgdTrackError, ValueError):
    """A closed-form constant is undefined for the given (alpha, gamma) pair."""


class ConfigError(DgdTrackError, ValueError):
    """A config file or override could not be parsed or contains unknown keys."""
