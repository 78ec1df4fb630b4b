class AlphaPotError(Exception):
    """Base class for library errors."""


class ShapeError(AlphaPotError, ValueError):
    """Array shapes disagree with the game they are used with."""


class ParameterError(AlphaPotError, ValueError):
    """A scalar parameter or probability table is out of its valid range."""


class SolverError(AlphaPotError, RuntimeError):
    """An internal solver failed in a way that should be impossible."""
