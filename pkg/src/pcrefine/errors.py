"""Exception hierarchy shared across the package."""


class PcrefineError(Exception):
    """Base class for all package errors."""


class ConfigError(PcrefineError):
    """Invalid configuration value (bad threshold, non-positive grid size, ...)."""


class ContractError(PcrefineError):
    """A caller violated a documented precondition."""


class AlignmentError(ContractError):
    """Arrays that must be row-aligned have mismatched lengths."""


class EmptyMaskError(ContractError):
    """A pooling mask selected zero points."""


class FormatError(PcrefineError):
    """A file could not be parsed; the message names the offending location."""
