"""Exception types shared across the package."""


class QRelayError(Exception):
    """Base class for all errors raised by this package."""


class DimMismatch(QRelayError):
    """Operands or declared dimensions do not agree."""


class NotHermitian(QRelayError):
    """Matrix is not equal to its conjugate transpose within tolerance."""


class NotPSD(QRelayError):
    """Matrix has an eigenvalue below the PSD tolerance floor."""

    def __init__(self, min_eigenvalue, message=None):
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__(message or f"not positive semi-definite (min eigenvalue {self.min_eigenvalue:.3e})")


class TraceNotOne(QRelayError):
    """Trace differs from 1 beyond tolerance."""

    def __init__(self, trace, message=None):
        self.trace = complex(trace)
        super().__init__(message or f"trace is {self.trace.real:.10g}, expected 1")


class BadSubsystemIndex(QRelayError):
    """A subsystem index does not refer to a declared tensor factor."""


class AlphabetMismatch(QRelayError):
    """Distribution and channel disagree on alphabet sizes."""


class SizeCap(QRelayError):
    """A requested computation exceeds the configured dense-dimension cap."""


class InequalityViolated(QRelayError):
    """A verified operator inequality failed, with the offending margin."""

    def __init__(self, which, margin, message=None):
        self.which = which
        self.margin = float(margin)
        super().__init__(message or f"operator inequality {which} violated (margin {self.margin:.3e})")


class PreconditionViolated(QRelayError):
    """An operator-lemma check was called outside its hypotheses."""


class ParseError(QRelayError):
    """A channel-spec file could not be parsed."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{message} (line {line}, column {column})"
        super().__init__(message)
