from enum import Enum
from typing import NamedTuple, Optional


class Baseline(Enum):
    """Reference generators that evaluate can score in place of model samples."""

    CONSTANT_VELOCITY = "constant_velocity"
    LINEAR_INTERPOLATION = "linear_interpolation"
    GAUSSIAN = "gaussian"


# Metrics of one evaluation run.  Metrics that do not apply to the kind of samples evaluated (for
# instance ADE for unconditional samples) are None.
MetricReport = NamedTuple(
    "MetricReport",
    [
        ("ade", Optional[float]),
        ("fde", Optional[float]),
        ("min_ade_k", Optional[float]),
        ("min_fde_k", Optional[float]),
        ("marginal_score", Optional[float]),
        ("classification_score", Optional[float]),
        ("prediction_score", Optional[float]),
        ("k", int),
        ("bins", int),
    ],
)
