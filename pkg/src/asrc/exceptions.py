"""Exception and warning types shared across the package."""


class AsrcError(Exception):
    """Base class for all errors raised by this package."""


class ShapeMismatch(AsrcError, ValueError):
    """Operands have incompatible shapes."""


class LengthMismatch(AsrcError, ValueError):
    """Paired label arrays differ in length."""


class NumericalError(AsrcError):
    """Base class for failures of the numerical machinery (CLI exit code 3)."""


class NonConvergence(NumericalError):
    """An iterative solver exhausted its iteration budget."""


class NotPositiveDefinite(NumericalError):
    """A conjugate-gradient denominator went non-positive beyond round-off."""


class NonFiniteLoss(NumericalError):
    """The training loss became NaN or infinite (divergent training)."""


class EmptyGraph(NumericalError):
    """An operation that needs at least one positively weighted edge got none."""


class IsolatedNode(NumericalError):
    """A graph row has zero degree; the row-stochastic input is corrupted."""


class ConfigError(AsrcError):
    """Invalid configuration (CLI exit code 2)."""


class MissingClusterCount(ConfigError):
    """The adagae variant needs an explicit cluster count."""


class ParseError(AsrcError):
    """A data file could not be parsed; the message carries the location."""


class DimensionError(AsrcError):
    """A data file has inconsistent or unusable dimensions."""


class RankDeficientWarning(UserWarning):
    """Fewer nonzero singular values than requested components."""


class DisconnectedWarning(UserWarning):
    """The mutual k-nearest-neighbour graph left some nodes isolated."""
