class ParameterError(ValueError):
    """Raised when a physical or protocol parameter is outside its valid domain."""


class ConfigMismatchError(ParameterError):
    """Raised when a commitment is checked under a different public configuration."""
