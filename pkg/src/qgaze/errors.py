"""Exception types shared across the package."""


class QGazeError(Exception):
    """Base class for errors raised by this package."""


class ShapeError(QGazeError):
    """Operand shapes are inconsistent with the operation's contract."""


class NonFiniteError(QGazeError):
    """An input contains NaN or infinity where finite values are required."""


class MissingCacheError(QGazeError):
    """A backward pass was invoked without the matching forward cache."""


class EnvError(QGazeError):
    """Invalid interaction with an environment (e.g. stepping after done)."""


class ReplayFormatError(QGazeError):
    """A replay or checkpoint file is malformed or has the wrong version."""


class ConstantMapError(QGazeError):
    """A metric is undefined because the saliency map has zero variance."""
