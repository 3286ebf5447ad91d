"""Exception hierarchy shared across the package."""


class XpdError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(XpdError):
    """Invalid run configuration (bad schema, unknown keys, bad values)."""


class DataError(XpdError):
    """Invalid or unusable input data (files, labels, shapes)."""


class MetricUndefinedError(XpdError):
    """A metric has no defined value for the given inputs (degenerate case)."""


class StageError(XpdError):
    """A pipeline stage failed; carries the stage name, chains the cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
