"""Exception hierarchy shared by every module.

Each error class carries the process exit code the CLI maps it to.
"""


class WarpError(Exception):
    exit_code = 1


class InputError(WarpError, ValueError):
    exit_code = 2


class ConfigError(WarpError):
    exit_code = 2

    def __init__(self, key, message):
        super().__init__(f"{key}: {message}")
        self.key = key


class ResourceLimitError(WarpError):
    exit_code = 3

    def __init__(self, what, cap):
        super().__init__(f"{what} exceeds cap {cap}")
        self.cap = cap


class ConvergenceError(WarpError):
    exit_code = 4

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class SingularityError(WarpError, ZeroDivisionError):
    exit_code = 4


class DiscretizationError(WarpError):
    exit_code = 1


class BoundaryError(WarpError):
    """An operation needs points outside the region a map is defined on."""

    exit_code = 1
