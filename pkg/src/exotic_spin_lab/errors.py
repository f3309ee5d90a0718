"""Exception hierarchy. CLI exit codes are attached to the classes."""


class ExoticSpinLabError(Exception):
    exit_code = 1


class ConfigError(ExoticSpinLabError, ValueError):
    """Invalid configuration, parameter or sampling request."""

    exit_code = 2

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidResolutionError(ConfigError):
    pass


class SingularDistanceError(ExoticSpinLabError, ValueError):
    """A source point coincides with the field point."""

    exit_code = 3


class LeakageError(ExoticSpinLabError, ValueError):
    """A record does not span an integer number of rotation periods."""

    exit_code = 3


class FitError(ExoticSpinLabError, RuntimeError):
    exit_code = 3


class ConvergenceError(ExoticSpinLabError, RuntimeError):
    exit_code = 3


class AcceptanceError(ExoticSpinLabError):
    exit_code = 4
