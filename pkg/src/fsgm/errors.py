"""Exception hierarchy shared by every stage of the pipeline."""


class FsgmError(Exception):
    """Base class for all package errors."""


class ValidationError(FsgmError, ValueError):
    """Input failed a shape, range or consistency check."""


class DegenerateDataError(FsgmError, ValueError):
    """Data carry no usable variation (e.g. all pairwise distances are zero)."""


class UnsupportedTopologyError(ValidationError):
    """Graph has too few nodes for the requested operation."""


class TuningError(FsgmError, RuntimeError):
    """A GCV search produced no finite criterion value."""


class NumericalError(FsgmError, ArithmeticError):
    """A computation produced non-finite output."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})

    def __str__(self):
        base = super().__str__()
        if not self.diagnostics:
            return base
        extra = ", ".join(f"{k}={v:.3g}" for k, v in self.diagnostics.items())
        return f"{base} ({extra})"
