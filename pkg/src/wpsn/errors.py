"""Exception hierarchy shared by all wpsn modules.

Each class carries an ``exit_code`` used by the command-line front end.
"""


class WpsnError(Exception):
    exit_code = 1


class InvalidArgument(WpsnError, ValueError):
    exit_code = 2


class ConfigError(WpsnError):
    """Raised by config parsing; ``errors`` lists every problem found."""

    exit_code = 3

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class SingularGeometry(WpsnError):
    exit_code = 4


class DegenerateChannel(WpsnError):
    exit_code = 4


class DegenerateGeometry(WpsnError):
    exit_code = 4


class NumericError(WpsnError):
    exit_code = 5


class Infeasible(WpsnError):
    exit_code = 6

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class UnsupportedConfig(WpsnError):
    exit_code = 2
