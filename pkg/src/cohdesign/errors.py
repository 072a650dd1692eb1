"""Exception types shared across the package."""


class CoherenceError(Exception):
    """Base class for all errors raised by this package."""


class ZeroColumn(CoherenceError, ValueError):
    def __init__(self, index):
        self.index = int(index)
        super().__init__(f"column {self.index} has (numerically) zero norm")


class TooFewColumns(CoherenceError, ValueError):
    pass


class InvalidDims(CoherenceError, ValueError):
    pass


class BadBins(CoherenceError, ValueError):
    pass


class ShapeMismatch(CoherenceError, ValueError):
    pass


class RankDeficient(CoherenceError, ValueError):
    pass


class DegenerateLS(CoherenceError, ValueError):
    pass


class BadSparsity(CoherenceError, ValueError):
    pass


class NotUnitColumn(CoherenceError, ValueError):
    pass


class NonFinite(CoherenceError, ValueError):
    pass


class ConfigError(CoherenceError, ValueError):
    pass
