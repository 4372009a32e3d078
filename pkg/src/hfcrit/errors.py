"""Exception and warning types shared across the package."""


class HFCritError(Exception):
    """Base class for all package errors."""


class ConfigurationError(HFCritError, ValueError):
    """Invalid system, basis or job configuration."""

    def __init__(self, message, key_path=None):
        self.key_path = key_path
        if key_path:
            message = f"{key_path}: {message}"
        super().__init__(message)


class UnsupportedFeatureError(HFCritError, NotImplementedError):
    pass


class ContractViolation(HFCritError, ValueError):
    """An input violates the documented precondition of an operation."""


class FCIDumpParseError(HFCritError, ValueError):
    def __init__(self, message, line_number=None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)


class DataIntegrityError(HFCritError, ValueError):
    pass


class ResourceLimitError(HFCritError, RuntimeError):
    def __init__(self, message, size=None):
        self.size = size
        super().__init__(message)


class DegenerateConstructionError(HFCritError, ValueError):
    pass


class NonStationaryWarning(UserWarning):
    """Second-order information requested away from a critical point."""


class SpectrumClippedWarning(UserWarning):
    pass
