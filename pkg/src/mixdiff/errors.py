"""Exception types shared across the package."""


class MixdiffError(Exception):
    """Base class for all package-specific errors."""


class InvalidObject(MixdiffError):
    """Object attributes violate their invariants (size, angle, empty-slot zeros)."""


class InvalidFloor(MixdiffError):
    """Floor polygon is degenerate, self-intersecting, or too small."""


class UnknownLabel(MixdiffError):
    """A label name is not present in the vocabulary."""


class InvalidSchedule(MixdiffError):
    """Schedule parameters produce an infeasible corruption process."""


class StepOutOfRange(MixdiffError):
    """Timestep t is outside the valid range for the requested operation."""


class InvalidInput(MixdiffError):
    """Malformed tensor shapes, state indices, or configuration values."""


class UnreachableState(MixdiffError):
    """A conditioned state has zero probability under the corruption process."""


class InvalidMask(MixdiffError):
    """A constraint mask references bad slots or carries invalid values."""


class InvalidCheckpoint(MixdiffError):
    """Checkpoint container is malformed or inconsistent with its config."""


class InsufficientData(MixdiffError):
    """Not enough qualifying samples to compute the requested statistic."""


class TrainingDiverged(MixdiffError):
    """Training loss became non-finite."""
