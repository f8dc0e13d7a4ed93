"""Exception hierarchy shared by all povmsim modules."""


class PovmsimError(Exception):
    """Base class for all errors raised by povmsim."""


class BudgetExceeded(PovmsimError):
    """A dense operator would exceed the configured entry budget."""


class NumericalFailure(PovmsimError):
    """A numerical routine failed (non-convergence, non-finite values)."""


class ConvergenceFailure(NumericalFailure):
    pass


class DimensionMismatch(PovmsimError, ValueError):
    pass


class NotHermitian(PovmsimError, ValueError):
    pass


class NotPositive(PovmsimError, ValueError):
    """An operator has an eigenvalue below the PSD tolerance."""


class NotADensityOperator(PovmsimError, ValueError):
    pass


class NotIsometry(PovmsimError, ValueError):
    pass


class LabelMismatch(PovmsimError, ValueError):
    pass


class AverageMismatch(PovmsimError, ValueError):
    """An ensemble does not average to the expected state."""


class FieldDivisionByZero(PovmsimError, ZeroDivisionError):
    pass


class ConfigError(PovmsimError):
    pass


class SchemaError(ConfigError):
    """Invalid instance data; ``pointer`` is a JSON pointer to the offending value."""

    def __init__(self, pointer: str, message: str):
        self.pointer = pointer
        self.message = message
        super().__init__(f"{pointer or '/'}: {message}")


class IncompatibleTriple(PovmsimError, ValueError):
    """A (W, mu, p_{Y|W}) triple does not reproduce the target POVM on the state."""
