from enum import Enum
from typing import NamedTuple

import numpy as np

from geotdm.exc import InvalidManifestError


class SystemKind(Enum):
    CHARGED = "charged"
    SPRING = "spring"
    GRAVITY = "gravity"


# Physical setup of one family of N-body systems.  dt is the simulated time between stored
# frames; the integrator takes substeps steps of dt / substeps per stored frame.  coupling is the
# Coulomb constant, the spring stiffness, or the gravitational constant depending on kind.
SystemSpec = NamedTuple(
    "SystemSpec",
    [
        ("kind", SystemKind),
        ("n_bodies", int),
        ("dim", int),
        ("dt", float),
        ("substeps", int),
        ("coupling", float),
        ("rest_length", float),
        ("spring_probability", float),
        ("softening", float),
        ("position_scale", float),
        ("velocity_scale", float),
        ("min_mass", float),
        ("max_mass", float),
    ],
)

DEFAULT_SYSTEM_SPECS = {
    SystemKind.CHARGED: SystemSpec(
        kind=SystemKind.CHARGED,
        n_bodies=5,
        dim=3,
        dt=0.05,
        substeps=10,
        coupling=1.0,
        rest_length=0.0,
        spring_probability=0.0,
        softening=0.1,
        position_scale=1.0,
        velocity_scale=0.5,
        min_mass=1.0,
        max_mass=1.0,
    ),
    SystemKind.SPRING: SystemSpec(
        kind=SystemKind.SPRING,
        n_bodies=5,
        dim=3,
        dt=0.05,
        substeps=10,
        coupling=1.0,
        rest_length=1.0,
        spring_probability=0.5,
        softening=0.0,
        position_scale=1.0,
        velocity_scale=0.5,
        min_mass=0.5,
        max_mass=2.0,
    ),
    SystemKind.GRAVITY: SystemSpec(
        kind=SystemKind.GRAVITY,
        n_bodies=10,
        dim=3,
        dt=0.05,
        substeps=10,
        coupling=0.2,
        rest_length=0.0,
        spring_probability=0.0,
        softening=0.1,
        position_scale=1.0,
        velocity_scale=0.5,
        min_mass=0.5,
        max_mass=2.0,
    ),
}

# Split sizes and window lengths of a simulated dataset.  Each stored trajectory keeps the last
# cond_frames + target_frames of total_frames simulated frames.
DatasetManifest = NamedTuple(
    "DatasetManifest",
    [
        ("n_train", int),
        ("n_valid", int),
        ("n_test", int),
        ("total_frames", int),
        ("cond_frames", int),
        ("target_frames", int),
        ("seed", int),
    ],
)

DEFAULT_MANIFEST = DatasetManifest(
    n_train=3000,
    n_valid=2000,
    n_test=2000,
    total_frames=30,
    cond_frames=10,
    target_frames=20,
    seed=0,
)


class InvalidSystemSpecException(Exception):
    """A SystemSpec violates its invariants."""

    pass


def check_system_spec(spec):
    # type: (SystemSpec) -> None
    if spec.n_bodies < 2:
        msg = "n_bodies must be at least 2, got {}".format(spec.n_bodies)
        raise InvalidSystemSpecException(msg)
    if spec.dim not in (2, 3):
        raise InvalidSystemSpecException("dim must be 2 or 3, got {}".format(spec.dim))
    if spec.dt <= 0:
        raise InvalidSystemSpecException("dt must be positive, got {}".format(spec.dt))
    if spec.substeps < 1:
        raise InvalidSystemSpecException("substeps must be at least 1")
    if spec.softening < 0:
        raise InvalidSystemSpecException("softening must be non-negative")
    if not 0.0 <= spec.spring_probability <= 1.0:
        raise InvalidSystemSpecException("spring_probability must lie in [0, 1]")
    if not 0 < spec.min_mass <= spec.max_mass:
        raise InvalidSystemSpecException("masses must satisfy 0 < min_mass <= max_mass")


def check_manifest(manifest):
    # type: (DatasetManifest) -> None
    counts = (manifest.n_train, manifest.n_valid, manifest.n_test)
    if min(counts) < 1:
        msg = "every split needs at least one trajectory, got {}".format(counts)
        raise InvalidManifestError(msg)
    if manifest.cond_frames < 1 or manifest.target_frames < 1:
        raise InvalidManifestError("cond_frames and target_frames must be at least 1")
    if manifest.total_frames < manifest.cond_frames + manifest.target_frames:
        msg = "total_frames {} is shorter than cond_frames + target_frames {}".format(
            manifest.total_frames, manifest.cond_frames + manifest.target_frames
        )
        raise InvalidManifestError(msg)

# Initial conditions of one simulation.  Arrays are numpy float64: positions and velocities are
# N x D, masses and charges have length N, and adjacency is the N x N 0/1 spring matrix (all ones
# off the diagonal for charged and gravity systems).
InitialState = NamedTuple(
    "InitialState",
    [
        ("positions", np.ndarray),
        ("velocities", np.ndarray),
        ("masses", np.ndarray),
        ("charges", np.ndarray),
        ("adjacency", np.ndarray),
    ],
)
