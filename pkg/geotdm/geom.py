"""Geometric primitives for trajectories.

Coordinates are torch tensors whose last three axes are (frame, node, dimension); any leading axes
are batch axes.  All random draws take an explicit torch.Generator so results are reproducible and
callers running concurrently never share random state.
"""

import math
from typing import TYPE_CHECKING

import networkx as nx
import torch

from geotdm.constants import ROTATION_TOLERANCE, TRANSLATION_SCALE
from geotdm.entities.trajectory import (
    GeoTrajectory,
    InvalidTrajectoryException,
    RigidMotion,
    SubspaceNoise,
)
from geotdm.exc import GeometryError, NumericalError

if TYPE_CHECKING:
    from torch import Tensor
    from typing import Callable, Optional, Sequence, Union


def center_of_mass(x):
    # type: (Tensor) -> Tensor
    """Return the per-frame mean over nodes, shape (..., T, D)."""
    return x.mean(dim=-2)


def project_zero_com(x):
    # type: (Tensor) -> Tensor
    """Project onto the subspace of trajectories whose time-averaged CoM is zero.

    Subtracts the mean over all T * N points of each trajectory, per dimension.  The map is
    linear, idempotent, commutes with rotations, and annihilates constant translations.
    """
    return x - x.mean(dim=(-3, -2), keepdim=True)


def sample_subspace_gaussian(
    T,  # type: int
    N,  # type: int
    D,  # type: int
    generator,  # type: torch.Generator
    batch_shape=(),  # type: Sequence[int]
    dtype=torch.float32,  # type: torch.dtype
):
    # type: (...) -> SubspaceNoise
    """Draw from the isotropic Gaussian restricted to the zero-CoM subspace."""
    if min(T, N, D) < 1:
        raise GeometryError("T, N and D must be at least 1, got {}".format((T, N, D)))
    shape = tuple(batch_shape) + (T, N, D)
    values = torch.randn(shape, generator=generator, dtype=torch.float64).to(dtype)
    return SubspaceNoise(project_zero_com(values))


def check_rotation(rotation):
    # type: (Tensor) -> None
    """Raise GeometryError unless rotation is in SO(D) up to ROTATION_TOLERANCE."""
    if rotation.dim() != 2 or rotation.shape[0] != rotation.shape[1]:
        raise GeometryError("rotation must be a square matrix, got {}".format(rotation.shape))
    r = rotation.to(torch.float64)
    identity = torch.eye(r.shape[0], dtype=torch.float64, device=r.device)
    if (r.t() @ r - identity).abs().max() > ROTATION_TOLERANCE:
        raise GeometryError("rotation is not orthogonal")
    if abs(torch.det(r).item() - 1.0) > ROTATION_TOLERANCE:
        raise GeometryError("rotation does not have determinant +1")


def rotate_translate(x, rotation, translation=None):
    # type: (Tensor, Tensor, Optional[Tensor]) -> Tensor
    """Apply y = R x + r to every point of x, whose last axis is the spatial dimension."""
    if x.shape[-1] != rotation.shape[-1]:
        msg = "rotation acts on {} dimensions, coordinates have {}".format(
            rotation.shape[-1], x.shape[-1]
        )
        raise GeometryError(msg)
    y = x @ rotation.to(x.dtype).t()
    if translation is not None:
        y = y + translation.to(x.dtype)
    return y


def apply_rigid_motion(g, trajectory):
    # type: (RigidMotion, GeoTrajectory) -> GeoTrajectory
    """Act with g on every frame of a trajectory; features and edges are unchanged."""
    if g.translation.shape[-1] != g.rotation.shape[-1]:
        raise GeometryError("translation and rotation dimensions differ")
    check_rotation(g.rotation)
    coords = rotate_translate(trajectory.coords, g.rotation, g.translation)
    return trajectory._replace(coords=coords)


def random_rotation(D, generator, dtype=torch.float64):
    # type: (int, torch.Generator, torch.dtype) -> Tensor
    """Draw a Haar-uniform rotation in SO(D).

    QR of a Gaussian matrix with the signs of R's diagonal folded into Q is Haar on O(D); flipping
    one column of the improper half maps it onto SO(D) without changing uniformity.
    """
    if D not in (2, 3):
        raise GeometryError("random rotations are supported for D in {{2, 3}}, got {}".format(D))
    a = torch.randn(D, D, generator=generator, dtype=torch.float64)
    q, r = torch.linalg.qr(a)
    q = q * torch.sign(torch.diagonal(r)).unsqueeze(0)
    if torch.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q.to(dtype)


def random_rigid_motion(D, generator, translation_scale=TRANSLATION_SCALE, dtype=torch.float64):
    # type: (int, torch.Generator, float, torch.dtype) -> RigidMotion
    rotation = random_rotation(D, generator, dtype)
    u = torch.rand(D, generator=generator, dtype=torch.float64)
    translation = ((2.0 * u - 1.0) * translation_scale).to(dtype)
    return RigidMotion(rotation, translation)


def identity_motion(D, dtype=torch.float64):
    # type: (int, torch.dtype) -> RigidMotion
    return RigidMotion(torch.eye(D, dtype=dtype), torch.zeros(D, dtype=dtype))


def compose_motions(second, first):
    # type: (RigidMotion, RigidMotion) -> RigidMotion
    """Return the motion that applies first, then second."""
    rotation = second.rotation @ first.rotation
    translation = second.rotation @ first.translation + second.translation
    return RigidMotion(rotation, translation)


def invert_motion(g):
    # type: (RigidMotion) -> RigidMotion
    inverse = g.rotation.t()
    return RigidMotion(inverse, -(inverse @ g.translation))


def finite_diff_gradient(f, p, h=1e-5):
    # type: (Callable[[Tensor], Union[float, Tensor]], Tensor, float) -> Tensor
    """Central-difference gradient of a scalar function, evaluated in float64."""
    if h <= 0:
        raise NumericalError("finite difference step must be positive, got {}".format(h))
    p = p.detach().to(torch.float64).reshape(-1)
    gradient = torch.zeros_like(p)
    for i in range(p.numel()):
        step = torch.zeros_like(p)
        step[i] = h
        forward = float(f(p + step))
        backward = float(f(p - step))
        if not (math.isfinite(forward) and math.isfinite(backward)):
            raise NumericalError("function is not finite near coordinate {}".format(i))
        gradient[i] = (forward - backward) / (2.0 * h)
    return gradient


def complete_graph_edges(n):
    # type: (int) -> Tensor
    """All ordered pairs (i, j) with i != j."""
    graph = nx.complete_graph(n, create_using=nx.DiGraph)
    return graph_edges(graph)


def graph_edges(graph):
    # type: (nx.Graph) -> Tensor
    """Ordered node pairs of a networkx graph; undirected edges appear in both directions."""
    if not graph.is_directed():
        graph = graph.to_directed()
    pairs = sorted(graph.edges())
    return torch.tensor(pairs, dtype=torch.long).reshape(-1, 2)


def edges_to_adjacency(edges, n, dtype=torch.float32):
    # type: (Tensor, int, torch.dtype) -> Tensor
    """Dense n x n matrix with A[i, j] = 1 for every edge (i, j)."""
    adjacency = torch.zeros(n, n, dtype=dtype)
    if edges.numel() == 0:
        return adjacency
    if edges.min() < 0 or edges.max() >= n:
        raise GeometryError("edge index out of range for {} nodes".format(n))
    if (edges[:, 0] == edges[:, 1]).any():
        raise GeometryError("self-loops are not allowed")
    adjacency[edges[:, 0], edges[:, 1]] = 1
    return adjacency


def adjacency_to_edges(adjacency):
    # type: (Tensor) -> Tensor
    return torch.nonzero(adjacency > 0, as_tuple=False).to(torch.long).reshape(-1, 2)


def check_trajectory(trajectory):
    # type: (GeoTrajectory) -> None
    coords = trajectory.coords
    if coords.dim() != 3 or coords.shape[0] < 1 or coords.shape[1] < 1:
        raise InvalidTrajectoryException("coords must be T x N x D, got {}".format(coords.shape))
    n = coords.shape[1]
    if trajectory.node_features.shape[0] != n:
        raise InvalidTrajectoryException("node_features do not match {} nodes".format(n))
    edges = trajectory.edges
    if edges.numel() and (edges.min() < 0 or edges.max() >= n):
        raise InvalidTrajectoryException("edge index out of range for {} nodes".format(n))
    if edges.numel() and (edges[:, 0] == edges[:, 1]).any():
        raise InvalidTrajectoryException("self-loops are not allowed")
    if not torch.isfinite(coords).all():
        raise InvalidTrajectoryException("coords are not finite")


def permute_nodes(trajectory, permutation):
    # type: (GeoTrajectory, Tensor) -> GeoTrajectory
    """Relabel nodes so that new node k is old node permutation[k]."""
    inverse = torch.empty_like(permutation)
    inverse[permutation] = torch.arange(permutation.numel(), dtype=permutation.dtype)
    edges = inverse[trajectory.edges] if trajectory.edges.numel() else trajectory.edges
    return trajectory._replace(
        coords=trajectory.coords[:, permutation],
        node_features=trajectory.node_features[permutation],
        edges=edges,
    )
