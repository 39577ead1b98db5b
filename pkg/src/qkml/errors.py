"""Exception and warning types shared across the toolkit."""


class QkmlError(Exception):
    """Base class for all toolkit errors."""


class ConfigError(QkmlError):
    """Invalid configuration: bad enum value, missing file, inconsistent shapes in config."""


class CapacityError(ConfigError):
    """Requested register size outside the supported qubit range."""


class DataError(QkmlError):
    """Malformed input data: bad CSV cells, non-binary labels, missing columns."""


class NumericalError(QkmlError):
    """Numerical failure: non-finite loss, solver breakdown."""


class SingleClassError(DataError):
    """Operation requires both classes but only one is present."""


class InfeasiblePolicyError(QkmlError):
    """No threshold attains the requested metric floor.

    Carries the attainable (threshold, precision, recall) frontier so callers
    can report what floors would have been feasible.
    """

    def __init__(self, message: str, frontier: list[tuple[float, float, float]]):
        super().__init__(message)
        self.frontier = frontier


class ConstantFeatureWarning(UserWarning):
    """A feature has zero range on the fit split and encodes to a constant angle."""


class UnseenCategoryWarning(UserWarning):
    """A categorical value absent from the fit vocabulary was encoded as all zeros."""


class NonPsdKernelWarning(UserWarning):
    """Kernel matrix indefinite beyond tolerance; diagonal jitter applied."""


class StepSizeWarning(UserWarning):
    """Constant learning rate exceeds the 1/beta smoothness bound."""
