"""
Exceptions for the mesh watermarking toolkit
Every error carries the exit code the command line reports for it
"""

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_CONFIG = 4
EXIT_CAPABILITY = 5
EXIT_CHANNEL = 6
EXIT_NOT_CONVERGED = 7


class WatermarkError(Exception):
    """Base class for all toolkit errors"""
    exit_code = EXIT_FAILURE


class MeshFormatError(WatermarkError, ValueError):
    """Malformed OBJ, alist or survival-map input"""
    exit_code = EXIT_PARSE

    def __init__(self, message: str, line_number: int = 0):
        if line_number:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ConfigError(WatermarkError, ValueError):
    """Bad configuration key, value or parameter combination"""
    exit_code = EXIT_CONFIG


class CapabilityError(WatermarkError):
    """The mesh or code cannot carry what was asked of it"""
    exit_code = EXIT_CAPABILITY


class ChannelError(WatermarkError, ValueError):
    """Invalid channel parameters or observations outside the channel law"""
    exit_code = EXIT_CHANNEL
