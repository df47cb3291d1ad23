"""Exception types shared across the package."""


class FairbellError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(FairbellError, ValueError):
    """A configuration document is malformed or out of range."""


class NoDataError(FairbellError, ValueError):
    """An estimator was asked to run on counts with no usable events."""


class ProtocolError(FairbellError, ValueError):
    """A sweep or control run violates the measurement protocol."""
