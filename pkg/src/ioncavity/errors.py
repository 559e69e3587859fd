"""Exception hierarchy shared by all modules.

The three top-level categories map one-to-one onto CLI exit codes
(config=1, model=2, numerical=3); keep new exceptions under one of them.
"""


class IonCavityError(Exception):
    """Base class for all errors raised by this package."""

    category = "internal"


class ConfigError(IonCavityError):
    """Malformed or inconsistent user-facing configuration input."""

    category = "config"


class ModelError(IonCavityError):
    """Invalid physical model input: bad quantum numbers, layout mismatches,
    out-of-domain parameters."""

    category = "model"


class NumericalError(IonCavityError):
    """A numerical procedure could not produce a trustworthy answer."""

    category = "numerical"


class NonUniqueSteadyStateError(NumericalError):
    """The Liouvillian kernel is degenerate; there is no unique steady state."""


class TrapInstabilityError(ModelError):
    """The pseudopotential radicand went negative (anti-trapping bias).

    Carries the offending radicand so callers can report how far past the
    stability threshold the requested bias sits.
    """

    def __init__(self, message: str, radicand: float):
        super().__init__(message)
        self.radicand = radicand


class UnderdeterminedFitError(ModelError):
    """The measurement design cannot constrain the requested fit parameters."""
