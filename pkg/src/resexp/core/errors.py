"""Exceptions raised by resexp."""


class ResexpError(Exception):
    """Base class for all resexp errors."""


class ParameterDomainError(ResexpError, ValueError):
    """A parameter lies outside its admissible domain."""


class DimensionMismatchError(ResexpError, ValueError):
    """Vectors or matrices have incompatible shapes."""


class IllPosedError(ResexpError):
    """A sub-problem has no unique solution (degenerate fit, singular system)."""


class RunFailure(ResexpError, RuntimeError):
    """An optimization run failed inside its inner solver."""

    def __init__(self, iteration: int, message: str):
        super().__init__(f"Run failed at iteration {iteration}: {message}")
        self.iteration = iteration
