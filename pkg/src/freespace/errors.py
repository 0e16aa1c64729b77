"""Exception types. Each carries a short ``category`` used by the CLI error line."""


class FreespaceError(Exception):
    category = "error"


class ContractViolation(FreespaceError, ValueError):
    category = "contract"


class ConfigError(FreespaceError, ValueError):
    category = "config"


class OutOfRangeError(FreespaceError, ValueError):
    category = "out_of_range"


class SingularSystemError(FreespaceError, ArithmeticError):
    category = "singular"


class DegenerateDisparityError(FreespaceError, ValueError):
    category = "degenerate_disparity"


class WindowTooLargeError(FreespaceError, ValueError):
    category = "window_too_large"


class NoValidPixelsError(FreespaceError, ValueError):
    category = "no_valid_pixels"


class UninitializedStateError(FreespaceError, RuntimeError):
    category = "uninitialized"


class NumericError(FreespaceError, ArithmeticError):
    category = "numeric"


class FrameError(FreespaceError):
    """Wraps a module error raised while processing one scenario frame."""

    category = "frame"

    def __init__(self, frame: int, cause: Exception):
        self.frame = frame
        self.cause = cause
        cat = getattr(cause, "category", type(cause).__name__)
        super().__init__(f"frame {frame}: {cat}: {cause}")
