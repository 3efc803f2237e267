"""Exception types shared across the package."""


class SpectraDxError(Exception):
    """Base class for all package errors."""


class DataIntegrityError(SpectraDxError):
    """Input contains NaN/Inf or otherwise violates basic data invariants."""


class ShapeMismatchError(SpectraDxError):
    """Array arguments have incompatible shapes."""


class ContractViolationError(SpectraDxError):
    """A caller-side precondition was violated (e.g. asymmetric matrix)."""


class TooSmallRegionError(SpectraDxError):
    """Masked region yields fewer than two feature patches."""


class FlowDivergenceError(SpectraDxError):
    """Training loss became non-finite; carries diagnostics."""

    def __init__(self, message, step=None, loss_history=None):
        super().__init__(message)
        self.step = step
        self.loss_history = list(loss_history or [])


class FormatError(SpectraDxError):
    """A serialized artifact is malformed or truncated."""
