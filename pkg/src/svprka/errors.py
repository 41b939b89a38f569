"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 1)."""


class NumericalError(RuntimeError):
    """A numerical routine failed (CLI exit code 2).

    Carries the module and operation that failed so the message can name them.
    """

    def __init__(self, module, operation, detail):
        self.module = module
        self.operation = operation
        self.detail = detail
        super().__init__(f"{module}.{operation}: {detail}")


class SvdError(NumericalError):
    """The SVD iteration did not converge."""
