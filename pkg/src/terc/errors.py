"""Exception hierarchy shared by every estimation step."""


class TercError(Exception):
    """Base class for all errors raised by the package."""


class PanelError(TercError):
    pass


class UnbalancedPanel(PanelError):
    pass


class NonNumeric(PanelError):
    pass


class DuplicateKey(PanelError):
    pass


class PeriodOutOfRange(PanelError, IndexError):
    pass


class DimensionMismatch(TercError, ValueError):
    pass


class SingularGram(TercError, ArithmeticError):
    """A Gram matrix stayed singular after the maximum ridge escalation."""


class TooFewObservations(TercError, ValueError):
    """The series basis has at least as many terms as there are observations."""


class UnsupportedDimension(TercError, ValueError):
    pass


class DegenerateDenominator(TercError, ArithmeticError):
    pass


class EmptyInput(TercError, ValueError):
    pass


class ConfigError(TercError, ValueError):
    pass
