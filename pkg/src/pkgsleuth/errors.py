"""Exception hierarchy shared across the toolkit."""


class PkgsleuthError(Exception):
    """Base class for all toolkit errors."""


class UnreadableArchive(PkgsleuthError):
    """The container is corrupt or in an unsupported format."""


class NoSourceCode(PkgsleuthError):
    """The package contains neither source units nor a metadata unit."""


class FeedUnavailable(PkgsleuthError):
    """The registry feed or archive endpoint could not be reached."""


class MalformedFeed(PkgsleuthError):
    """The feed body is not parseable RSS."""


class UncatalogedApi(PkgsleuthError):
    """An API usage does not resolve against the catalog."""


class TargetNotFound(PkgsleuthError):
    """A transformation target is absent from the unit."""


class InvalidSplit(PkgsleuthError):
    """A reorder split requests more parts than the string has characters."""


class ScorerFailure(PkgsleuthError):
    """The black-box scorer raised or returned an out-of-range value."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class SingleClassData(PkgsleuthError):
    """Training data has only one label class."""


class SchemaMismatch(PkgsleuthError):
    """A vector or store does not match the model's feature schema."""


class NoBenignSamples(PkgsleuthError):
    """Threshold tuning requires at least one benign sample."""


class PlanError(PkgsleuthError):
    """A transformation plan step failed; carries the step index."""

    def __init__(self, step_index, message):
        super().__init__(f"step {step_index}: {message}")
        self.step_index = step_index


class SandboxSetupFailure(PkgsleuthError):
    """The equivalence oracle subprocess could not be started."""


class ConfigError(PkgsleuthError):
    """A run configuration is missing or inconsistent (usage error)."""


class DataError(PkgsleuthError):
    """Referenced data (manifest, store, model) is missing or corrupt."""
