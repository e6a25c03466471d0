"""Exception and warning types raised across the package."""


class SlsGleError(Exception):
    """Base class for all package errors."""


class DimensionMismatchError(SlsGleError, ValueError):
    pass


class ConstantColumnError(SlsGleError, ValueError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} has zero variance")


class NotPsdError(SlsGleError, ValueError):
    pass


class InvalidAlphaError(SlsGleError, ValueError):
    pass


class DivergentWeightError(SlsGleError, ValueError):
    pass


class InactiveCoefficientError(SlsGleError, ValueError):
    pass


class DegenerateRssError(SlsGleError, ValueError):
    pass


class UnreachableSizeError(SlsGleError, ValueError):
    pass


class InvalidSpecError(SlsGleError, ValueError):
    pass


class TooShortError(SlsGleError, ValueError):
    pass


class ParseError(SlsGleError, ValueError):
    def __init__(self, line, message):
        self.line = line
        super().__init__(f"line {line}: {message}")


class NonPositivePriceError(SlsGleError, ValueError):
    def __init__(self, asset, date):
        self.asset = asset
        self.date = date
        super().__init__(f"non-positive or missing price for {asset!r} on {date}")


class UnsortedDatesError(SlsGleError, ValueError):
    pass


class ConfigError(SlsGleError, ValueError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


class ConvergenceWarning(UserWarning):
    """Iterative solver stopped at its iteration cap; the best iterate is returned."""
