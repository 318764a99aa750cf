"""
Exceptions raised by the gridder.

Every error carries the process exit code the CLI reports for it.
"""


class GridderError(Exception):
    exit_code = 4


class DomainError(GridderError, ValueError):
    """
    Invalid input: out of range parameters, inconsistent lengths, bad geometry.
    """

    exit_code = 2


class ConfigError(DomainError):
    """
    Run configuration does not match the expected schema.
    """


class FormatError(DomainError):
    """
    ArrayFile decoding failure at a given byte offset.
    """

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CapacityError(GridderError, RuntimeError):
    """
    A grid does not fit in the configured memory budget.
    """

    exit_code = 3

    def __init__(self, message: str, required_bytes=None, available_bytes=None):
        if required_bytes is not None and available_bytes is not None:
            message = (
                f"{message}: requires {int(required_bytes)} bytes, "
                f"{int(available_bytes)} bytes available"
            )
        super().__init__(message)
        self.required_bytes = required_bytes
        self.available_bytes = available_bytes


class InvariantError(GridderError, RuntimeError):
    exit_code = 4


class InfeasibleError(InvariantError):
    """
    Linear program has no feasible point.
    """


class UnboundedError(InvariantError):
    """
    Linear program objective is unbounded.
    """
