from enum import Enum
from typing import NamedTuple


class Generation(Enum):
    """How a set of generated trajectories was produced."""

    SAMPLE = "sample"
    FORECAST = "forecast"
    INTERPOLATE = "interpolate"
    REFINE = "refine"
    COMPOSE = "compose"


# Sidecar of a generated trajectory file.  The file holds n_trajectories * samples_per_trajectory
# records, trajectory-major, each n_frames long.  Conditional generations are aligned with the
# first n_trajectories trajectories of split in data_dir; cond_frames is 0 for unconditional ones.
SampleSetMetadata = NamedTuple(
    "SampleSetMetadata",
    [
        ("generation", Generation),
        ("kind", str),
        ("data_dir", str),
        ("split", str),
        ("n_trajectories", int),
        ("samples_per_trajectory", int),
        ("n_frames", int),
        ("cond_frames", int),
        ("task", str),
        ("seed", int),
    ],
)
