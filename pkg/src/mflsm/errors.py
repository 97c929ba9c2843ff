"""Exception types shared across the package."""


class DomainError(ValueError):
    """Special function evaluated outside its supported domain."""


class SceneValidationError(ValueError):
    """Raised with every violated scene invariant at once."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


class DatasetError(ValueError):
    """Shape, frequency or noise-state mismatch between datasets."""


class NumericalError(RuntimeError):
    """Base class for failures of a numerical routine."""


class SingularSystemError(NumericalError):
    pass


class ConvergenceError(NumericalError):
    pass


class UnsupportedConfiguration(ValueError):
    """Requested solver cannot handle the given scene."""
