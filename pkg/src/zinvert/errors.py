"""Exception hierarchy shared by every zinvert module."""


class ZinvertError(Exception):
    """Base class for all errors raised by this package."""


class InvalidConfigError(ZinvertError):
    """A configuration value is out of range or inconsistent."""


class DimensionMismatchError(ZinvertError):
    """Two vectors or batches that must share a shape do not."""


class ZeroVectorError(ZinvertError):
    """An all-zero feature vector where a direction is required."""


class ModelFailureError(ZinvertError):
    """A generator or extractor returned bad output (wrong shape, NaN/Inf).

    ``index`` is the position of the offending member within the batch,
    when it can be attributed to one.
    """

    def __init__(self, message: str, index: int | None = None):
        super().__init__(message)
        self.index = index


class UnevaluatedPopulationError(ZinvertError):
    """An operation that needs fitness values met an unevaluated member."""


class EmptyScoresError(ZinvertError):
    """A score list required for a rate or threshold is empty."""


class InsufficientSamplesError(ZinvertError):
    """A user lacks the samples required by the requested attack type."""


class InvalidAxisError(ZinvertError):
    """An ablation axis or one of its sweep values is not supported."""


class BridgeError(ZinvertError):
    """Base class for failures on the external-model connection."""


class ProtocolError(BridgeError):
    """The server sent something that is not a valid protocol reply."""


class BridgeTimeoutError(BridgeError):
    """The server did not answer within the configured deadline."""


class VersionMismatchError(BridgeError):
    """The server speaks an unsupported protocol version."""


class ServerReportedError(BridgeError):
    """The server answered with ok=false; carries the server's message."""
