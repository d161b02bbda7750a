"""Exception hierarchy shared by every rescnet module."""


class RescnetError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(RescnetError, ValueError):
    pass


class InsufficientDataError(RescnetError, ValueError):
    pass


class SingularityError(RescnetError, ArithmeticError):
    pass


class DomainError(RescnetError, ValueError):
    pass


class DegenerateLabelsError(RescnetError, ValueError):
    pass


class EmptyInputError(RescnetError, ValueError):
    pass


class FormatError(RescnetError, ValueError):
    """A data or checkpoint file does not follow its binary layout."""


class ConsistencyError(RescnetError, ValueError):
    """Two related inputs disagree, e.g. image and label counts."""


class DatasetIOError(RescnetError, OSError):
    def __init__(self, path, reason):
        super().__init__(f"{path}: {reason}")
        self.path = path


class NonSeparableError(RescnetError):
    def __init__(self, attempts, accepted):
        super().__init__(
            f"no separable sample found after {attempts} attempts "
            f"({accepted} filters accepted so far)")
        self.attempts = attempts
        self.accepted = accepted


class ConfigError(RescnetError, ValueError):
    def __init__(self, key, reason):
        super().__init__(f"invalid config key {key!r}: {reason}")
        self.key = key


class CheckpointError(FormatError):
    """A checkpoint file is damaged or truncated."""


class CheckpointVersionError(CheckpointError):
    """Checkpoint magic or version is not one this build can read."""


class LayerFailedError(RescnetError):
    """Training aborted; ``model`` holds the completed layer prefix."""

    def __init__(self, layer, model):
        super().__init__(f"training failed while adding layer {layer}")
        self.layer = layer
        self.model = model
