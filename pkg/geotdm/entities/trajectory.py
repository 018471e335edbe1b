from typing import NamedTuple, Optional

from torch import Tensor

from geotdm.exc import GeometryError

# A geometric trajectory: coords is T x N x D, node_features is N x D_h, and edges is an E x 2
# integer tensor of ordered (source, target) node pairs without self-loops.  dt is the simulated
# time between consecutive frames, if known.
GeoTrajectory = NamedTuple(
    "GeoTrajectory",
    [("coords", Tensor), ("node_features", Tensor), ("edges", Tensor), ("dt", Optional[float])],
)

# An element of SE(D) acting frame-wise on trajectories as x -> rotation @ x + translation.
RigidMotion = NamedTuple("RigidMotion", [("rotation", Tensor), ("translation", Tensor)])

# Gaussian noise restricted to the subspace of trajectories with zero time-averaged CoM.
SubspaceNoise = NamedTuple("SubspaceNoise", [("values", Tensor)])

# A batch of fixed-length windows cut from simulated trajectories.  target is B x T x N x D and
# condition is B x T_c x N x D, with condition_times giving the signed frame offset of each
# condition frame on the timeline where target frames sit at 0 ... T-1.  adjacency is a dense
# B x N x N 0/1 matrix with a zero diagonal.
TrajectoryWindows = NamedTuple(
    "TrajectoryWindows",
    [
        ("target", Tensor),
        ("condition", Tensor),
        ("condition_times", Tensor),
        ("node_features", Tensor),
        ("adjacency", Tensor),
    ],
)


class InvalidTrajectoryException(GeometryError):
    """A trajectory violates its shape or finiteness invariants."""

    pass


# A batch of same-shaped trajectories: coords is B x T x N x D, node_features is B x N x D_h, and
# adjacency is a dense B x N x N 0/1 matrix with a zero diagonal.
TrajectoryBatch = NamedTuple(
    "TrajectoryBatch", [("coords", Tensor), ("node_features", Tensor), ("adjacency", Tensor)]
)
