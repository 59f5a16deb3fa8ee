"""
Exception hierarchy. Every error knows the process exit code the command line
tool reports for it.
"""


class IonMotionError(Exception):
    """
    Base class for runtime and contract failures (exit code 3)
    """
    exit_code = 3


class DomainError(IonMotionError, ValueError):
    """
    A physical input lies outside the domain of the operation
    """


class ContractError(IonMotionError):
    """
    A record invariant or an operation precondition was violated
    """


class TruncationError(IonMotionError):
    """
    The Fock-space window cannot hold the distribution within the tail budget
    """


class IntegrationError(IonMotionError):
    pass


class UnphysicalRatioError(IonMotionError):
    """
    Sideband ratio >= 1: heating during the probe or measurement noise
    """


class ConfigError(IonMotionError):
    """
    Invalid run configuration (exit code 2). `key` is the dotted config key
    and `line` the 1-based line in the config file, when known.
    """
    exit_code = 2

    def __init__(self, message, key=None, line=None, path=None):
        self.key = key
        self.line = line
        self.path = path
        location = ""
        if path is not None:
            location = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(f"{location}{message}")


class FitError(IonMotionError):
    exit_code = 4


class InsufficientDataError(FitError):
    pass
