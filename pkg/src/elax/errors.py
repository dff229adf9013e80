"""Exception hierarchy shared by all elax modules."""


class ElaxError(Exception):
    """Base class for every error raised by elax."""

    exit_code = 1


class ConfigurationError(ElaxError, ValueError):
    """Invalid grid, experiment configuration or parameter combination.

    ``errors`` holds every problem found, each as a human-readable string.
    """

    exit_code = 2

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class UsageError(ElaxError, ValueError):
    """An operation was called outside its documented preconditions."""

    exit_code = 2


class GridMismatchError(UsageError):
    """Two fields living on different grids were combined."""


class BlowUpError(ElaxError, ArithmeticError):
    """Non-finite values or runaway enstrophy during time stepping."""

    exit_code = 3

    def __init__(self, t, reason="non-finite values"):
        self.t = t
        super().__init__(f"numerical blow-up at t={t:.6g}: {reason}")


class NumericalError(ElaxError, ArithmeticError):
    """A numerical kernel (eigensolver, Newton iteration, ...) failed."""

    exit_code = 3


class DegenerateInputError(ElaxError, ValueError):
    """Input makes the requested diagnostic meaningless, e.g. a zero denominator."""

    exit_code = 4


class IllConditionedBasisError(DegenerateInputError):
    """A basis Gram matrix is too ill-conditioned for a least-squares fit."""
