"""Exception types shared across the package."""


class SpectralBridgeError(Exception):
    """Base class for all package errors."""


class ValidationError(SpectralBridgeError):
    """Invalid input data, configuration, or file contents.

    The CLI maps this class to exit code 2.
    """


class TrainingDivergedError(SpectralBridgeError):
    """Training produced a non-finite loss."""

    def __init__(self, step: int, loss: float):
        super().__init__(f"training diverged at step {step}: loss={loss!r}")
        self.step = step
        self.loss = loss
