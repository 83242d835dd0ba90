"""Exception types shared across the package."""


class AceSeqError(Exception):
    """Base class for all errors raised by this package."""


class InvalidInputError(AceSeqError, ValueError):
    """An argument violates a documented precondition."""


class VocabularyError(InvalidInputError):
    """A symbol is not part of the alphabet (or is the blank where forbidden)."""


class CapacityError(InvalidInputError):
    """An annotation cannot fit into the available timesteps."""


class SizeGuardError(InvalidInputError):
    """A brute-force helper was asked to enumerate too large a space."""


class ZeroProbabilityError(AceSeqError, ArithmeticError):
    """A loss came out infinite because the target has probability zero."""


class TrainingDivergedError(AceSeqError, RuntimeError):
    """A training run produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"non-finite loss {loss!r} at epoch {epoch}")
