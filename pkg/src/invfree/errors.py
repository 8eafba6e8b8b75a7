"""Exception hierarchy shared by every module of the package."""


class InvFreeError(Exception):
    """Base class for all package errors."""


class SingularMatrix(InvFreeError):
    pass


class PowerIterationStall(InvFreeError):
    pass


class ParseError(InvFreeError):
    """Malformed problem document or expression.

    ``line`` is the 1-based equation number (or JSON line) and ``column`` the
    1-based character offset inside it.
    """

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + where)


class DimensionMismatch(InvFreeError):
    pass


class PointOutsideDomain(InvFreeError):
    pass


class NonFiniteValue(InvFreeError):
    def __init__(self, message, component=None):
        self.component = component
        super().__init__(message)


class GridTooLarge(InvFreeError):
    pass


class SingularNewtonStep(InvFreeError):
    pass


class CertificateFailed(InvFreeError):
    pass


class HOutOfRange(InvFreeError):
    pass


class InsufficientSamples(InvFreeError):
    pass
