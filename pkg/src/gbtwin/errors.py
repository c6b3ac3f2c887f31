"""Exception hierarchy shared by every gbtwin module."""


class GBTwinError(Exception):
    """Base class; the CLI maps any subclass to exit code 1."""


class DimensionMismatch(GBTwinError, ValueError):
    pass


class NotPositiveDefinite(GBTwinError, ValueError):
    pass


class DidNotConverge(GBTwinError, RuntimeError):
    """Raised by the box QP solver when the sweep budget runs out.

    The best iterate seen and its KKT residual are kept on the exception so
    callers can decide whether a slightly loose solution is usable.
    """

    def __init__(self, message, x=None, residual=None, iterations=None):
        super().__init__(message)
        self.x = x
        self.residual = residual
        self.iterations = iterations


class EmptyInput(GBTwinError, ValueError):
    pass


class DegenerateGranulation(GBTwinError, ValueError):
    pass


class DegeneratePair(GBTwinError, RuntimeError):
    pass


class TooFewClasses(GBTwinError, ValueError):
    pass


class ClassTooSmall(GBTwinError, ValueError):
    pass


class UndefinedAUC(GBTwinError, ValueError):
    pass


class DegenerateVariance(GBTwinError, ValueError):
    pass


class AllZeroDifferences(GBTwinError, ValueError):
    pass


class ParseError(GBTwinError, ValueError):
    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class MissingLabelColumn(GBTwinError, ValueError):
    pass
