from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from typing import List


class Error(Exception):
    """ Baseclass for GeoTDM Exceptions."""


class GeometryError(Error):
    """ Raised on dimension mismatches or invalid rigid motions."""


class SimulationError(Error):
    """ Raised when an N-body simulation cannot proceed."""


class NumericalError(Error):
    """ Raised when a computation produces non-finite values."""


class DiffusionError(Error):
    """ Raised on invalid noise schedules or diffusion steps out of range."""


class InvalidManifestError(Error):
    """ Raised when a dataset manifest violates its invariants."""


class TrajectoryFileError(Error):
    """ Baseclass for errors reading or writing GTRJ trajectory files."""


class TrajectoryFileCorrupted(TrajectoryFileError):
    """ Raised on bad magic, truncated records, or checksum mismatches."""


class TrajectoryFileVersionMismatch(TrajectoryFileError):
    """ Raised when a GTRJ record has an unsupported format version."""


class CheckpointError(Error):
    """ Baseclass for errors reading or writing model checkpoints."""


class CheckpointCorrupted(CheckpointError):
    """ Raised on truncated checkpoints or checksum mismatches."""


class CheckpointVersionMismatch(CheckpointError):
    """ Raised when a checkpoint has an unsupported format version."""


class CheckpointShapeMismatch(CheckpointError):
    """ Raised when checkpoint tensors do not fit the model being loaded."""

    def __init__(self, mismatches):
        # type: (List[str]) -> None
        self.mismatches = mismatches
        msg = "checkpoint does not match model: {}".format(", ".join(mismatches))
        super(CheckpointShapeMismatch, self).__init__(msg)


class EvaluationError(Error):
    """ Raised when metrics cannot be computed for the given inputs."""
