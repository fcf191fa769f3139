"""Exception hierarchy shared by all gkdvlab modules.

Exit-code mapping used by the CLI lives in ``gkdvlab.cli``.
"""


class GkdvError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(GkdvError):
    """Invalid static configuration: grid sizes, domain widths, config files."""


class ArgumentError(GkdvError):
    """Invalid call arguments: grid mismatch, unsupported derivative order."""


class WindowError(GkdvError):
    """A soliton center drifted too close to the periodic boundary."""


class ResolutionError(GkdvError):
    """The grid cannot resolve the requested object (modal tail too fat)."""


class AmbiguityError(GkdvError):
    """The eigensolver found more than one candidate real localized pair."""


class DegenerateBasisError(GkdvError):
    """(Y+, Z-) vanished before normalization; the basis cannot be pinned."""


class BlowUpError(GkdvError):
    """The evolution left the trusted regime (NaN or sup-norm overflow)."""

    def __init__(self, message, last_valid_time=None):
        super().__init__(message)
        self.last_valid_time = last_valid_time


class ConvergenceError(GkdvError):
    """An iterative solve (Newton, shooting, modulation) failed to converge."""


class HorizonError(GkdvError):
    """The final-data horizon is too small for the Gram matrix to be safe."""


class ClassificationError(GkdvError):
    """Plateau detection failed while a component was above the noise floor.

    Carries the partial coefficient vector recovered so far.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class DomainError(GkdvError):
    """Data handed to a fitting routine violates its domain (e.g. non-positive)."""
