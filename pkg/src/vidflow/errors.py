"""Exception hierarchy shared across the package."""


class VidflowError(Exception):
    """Base class for all package errors."""


class ShapeError(VidflowError):
    """Operand extents do not match the operation's contract."""


class ConfigError(VidflowError):
    """Invalid configuration value or combination."""


class FormatError(VidflowError):
    """Malformed on-disk artifact (bad magic, truncation, ...)."""


class ContractError(VidflowError):
    """A component violated its behavioral contract (e.g. a velocity
    model returned a grid of the wrong extent)."""
