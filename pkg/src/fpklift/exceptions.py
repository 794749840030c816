"""Exception types raised across the package."""


class InvalidArgumentError(ValueError):
    """An argument violates a documented precondition."""


class NumericalError(ArithmeticError):
    """A computation produced non-finite values."""


class ModelInconsistencyError(ValueError):
    """The coefficient model admits no particle representation (2a - sigma sigma^T not PSD)."""


class ConfigError(ValueError):
    """A configuration field is missing or out of range.

    The offending key path is kept on ``field`` so the CLI can name it.
    """

    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
