"""Synthetic N-body trajectories: charged particles, springs, and gravity.

Simulations run in numpy float64 with a velocity Verlet (leapfrog) integrator.  Each stored frame
is dt apart and is reached by spec.substeps integrator steps of dt / spec.substeps.
"""

import logging
from typing import TYPE_CHECKING

import networkx as nx
import numpy as np
import torch

from geotdm.constants import MIN_PARTICLE_SEPARATION, SPLITS
from geotdm.entities.config import Task
from geotdm.entities.system import (
    check_manifest,
    check_system_spec,
    InitialState,
    SystemKind,
)
from geotdm.entities.trajectory import GeoTrajectory, TrajectoryWindows
from geotdm.exc import SimulationError
from geotdm.geom import edges_to_adjacency, graph_edges

if TYPE_CHECKING:
    from geotdm.entities.system import DatasetManifest, SystemSpec
    from torch import Tensor
    from typing import Dict, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)


def sample_initial_state(spec, rng):
    # type: (SystemSpec, np.random.Generator) -> InitialState
    n, d = spec.n_bodies, spec.dim
    positions = rng.normal(0.0, spec.position_scale, size=(n, d))
    velocities = rng.normal(0.0, spec.velocity_scale, size=(n, d))
    masses = np.ones(n)
    charges = np.ones(n)
    adjacency = 1.0 - np.eye(n)
    if spec.kind == SystemKind.CHARGED:
        charges = rng.choice(np.array([-1.0, 1.0]), size=n)
    else:
        masses = rng.uniform(spec.min_mass, spec.max_mass, size=n)
    if spec.kind == SystemKind.SPRING:
        adjacency = spring_adjacency(n, spec.spring_probability, rng)
    return InitialState(positions, velocities, masses, charges, adjacency)


def spring_adjacency(n, probability, rng):
    # type: (int, float, np.random.Generator) -> np.ndarray
    """Connect each unordered pair independently with the given probability."""
    graph = nx.Graph()
    graph.add_nodes_from(range(n))
    draws = rng.random(size=(n, n))
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    graph.add_edges_from((i, j) for i, j in pairs if draws[i, j] < probability)
    return nx.to_numpy_array(graph, nodelist=range(n))


def _pairwise(positions):
    # type: (np.ndarray) -> Tuple[np.ndarray, np.ndarray]
    """Return d[i, j] = x_i - x_j and squared distances."""
    d = positions[:, None, :] - positions[None, :, :]
    return d, np.sum(d * d, axis=-1)


def _check_separation(spec, r2):
    # type: (SystemSpec, np.ndarray) -> None
    if spec.softening > 0 or r2.shape[0] < 2:
        return
    off_diagonal = r2[~np.eye(r2.shape[0], dtype=bool)]
    if np.sqrt(off_diagonal.min()) < MIN_PARTICLE_SEPARATION:
        raise SimulationError("particles overlap without softening")


def forces(spec, state, positions):
    # type: (SystemSpec, InitialState, np.ndarray) -> np.ndarray
    """Total force on every particle at the given positions."""
    d, r2 = _pairwise(positions)
    _check_separation(spec, r2)
    n = positions.shape[0]
    off_diagonal = 1.0 - np.eye(n)
    if spec.kind == SystemKind.SPRING:
        r = np.sqrt(r2)
        safe_r = np.where(r > 0, r, 1.0)
        coefficient = np.where(r > 0, -spec.coupling * (r - spec.rest_length) / safe_r, 0.0)
        coefficient = coefficient * state.adjacency * off_diagonal
    else:
        inverse_cube = off_diagonal / np.power(r2 + spec.softening ** 2 + np.eye(n), 1.5)
        if spec.kind == SystemKind.CHARGED:
            coefficient = spec.coupling * np.outer(state.charges, state.charges) * inverse_cube
        else:
            coefficient = -spec.coupling * np.outer(state.masses, state.masses) * inverse_cube
    return np.sum(coefficient[:, :, None] * d, axis=1)


def accelerations(spec, state, positions):
    # type: (SystemSpec, InitialState, np.ndarray) -> np.ndarray
    return forces(spec, state, positions) / state.masses[:, None]


def potential_energy(spec, state, positions):
    # type: (SystemSpec, InitialState, np.ndarray) -> float
    _, r2 = _pairwise(positions)
    upper = np.triu(np.ones_like(r2), k=1)
    if spec.kind == SystemKind.SPRING:
        stretch = np.sqrt(r2) - spec.rest_length
        return float(np.sum(upper * state.adjacency * 0.5 * spec.coupling * stretch ** 2))
    inverse = upper / np.sqrt(r2 + spec.softening ** 2 + np.tril(np.ones_like(r2)))
    if spec.kind == SystemKind.CHARGED:
        return float(np.sum(spec.coupling * np.outer(state.charges, state.charges) * inverse))
    return float(-np.sum(spec.coupling * np.outer(state.masses, state.masses) * inverse))


def kinetic_energy(state, velocities):
    # type: (InitialState, np.ndarray) -> float
    return float(0.5 * np.sum(state.masses[:, None] * velocities ** 2))


def total_momentum(state, velocities):
    # type: (InitialState, np.ndarray) -> np.ndarray
    return np.sum(state.masses[:, None] * velocities, axis=0)


def integrate(spec, state, steps):
    # type: (SystemSpec, InitialState, int) -> Tuple[np.ndarray, np.ndarray]
    """Leapfrog from the initial state; returns positions and velocities, steps x N x D each.

    Frame 0 is the initial state.
    """
    if steps < 1:
        raise SimulationError("steps must be at least 1, got {}".format(steps))
    h = spec.dt / spec.substeps
    x = np.array(state.positions, dtype=np.float64)
    v = np.array(state.velocities, dtype=np.float64)
    a = accelerations(spec, state, x)
    positions = np.empty((steps,) + x.shape)
    velocities = np.empty((steps,) + x.shape)
    positions[0], velocities[0] = x, v
    for frame in range(1, steps):
        for _ in range(spec.substeps):
            v = v + 0.5 * h * a
            x = x + h * v
            a = accelerations(spec, state, x)
            v = v + 0.5 * h * a
        positions[frame], velocities[frame] = x, v
    return positions, velocities


def _to_trajectory(spec, state, positions, features):
    # type: (SystemSpec, InitialState, np.ndarray, np.ndarray) -> GeoTrajectory
    graph = nx.from_numpy_array(state.adjacency * (1.0 - np.eye(spec.n_bodies)))
    return GeoTrajectory(
        coords=torch.from_numpy(positions),
        node_features=torch.from_numpy(features.reshape(-1, 1).astype(np.float64)),
        edges=graph_edges(graph),
        dt=spec.dt,
    )


def _simulate(
    kind,  # type: SystemKind
    spec,  # type: SystemSpec
    steps,  # type: int
    rng,  # type: np.random.Generator
    initial,  # type: Optional[InitialState]
):
    # type: (...) -> GeoTrajectory
    if spec.kind != kind:
        raise SimulationError("expected a {} system, got {}".format(kind.value, spec.kind.value))
    check_system_spec(spec)
    state = initial if initial is not None else sample_initial_state(spec, rng)
    positions, _ = integrate(spec, state, steps)
    features = state.charges if kind == SystemKind.CHARGED else state.masses
    return _to_trajectory(spec, state, positions, features)


def simulate_charged(spec, steps, rng, initial=None):
    # type: (SystemSpec, int, np.random.Generator, Optional[InitialState]) -> GeoTrajectory
    """Unit-mass particles with charges +1/-1 under softened Coulomb forces."""
    return _simulate(SystemKind.CHARGED, spec, steps, rng, initial)


def simulate_spring(spec, steps, rng, initial=None):
    # type: (SystemSpec, int, np.random.Generator, Optional[InitialState]) -> GeoTrajectory
    """Random-mass particles joined by Hooke springs; edges are the realized springs."""
    return _simulate(SystemKind.SPRING, spec, steps, rng, initial)


def simulate_gravity(spec, steps, rng, initial=None):
    # type: (SystemSpec, int, np.random.Generator, Optional[InitialState]) -> GeoTrajectory
    """Random-mass bodies under softened Newtonian gravity."""
    return _simulate(SystemKind.GRAVITY, spec, steps, rng, initial)


_SIMULATORS = {
    SystemKind.CHARGED: simulate_charged,
    SystemKind.SPRING: simulate_spring,
    SystemKind.GRAVITY: simulate_gravity,
}


def simulate(spec, steps, rng, initial=None):
    # type: (SystemSpec, int, np.random.Generator, Optional[InitialState]) -> GeoTrajectory
    return _SIMULATORS[spec.kind](spec, steps, rng, initial)


def build_dataset(spec, manifest):
    # type: (SystemSpec, DatasetManifest) -> Dict[str, List[GeoTrajectory]]
    """Simulate every split of a dataset.

    Each trajectory gets its own random stream spawned from the manifest seed, so the result is
    deterministic and does not depend on the order trajectories are simulated in.  Only the last
    cond_frames + target_frames frames of each simulation are kept.
    """
    check_system_spec(spec)
    check_manifest(manifest)
    counts = {"train": manifest.n_train, "valid": manifest.n_valid, "test": manifest.n_test}
    window = manifest.cond_frames + manifest.target_frames
    split_seeds = np.random.SeedSequence(manifest.seed).spawn(len(SPLITS))
    dataset = {}  # type: Dict[str, List[GeoTrajectory]]
    for split, split_seed in zip(SPLITS, split_seeds):
        trajectories = []
        for trajectory_seed in split_seed.spawn(counts[split]):
            rng = np.random.default_rng(trajectory_seed)
            trajectory = simulate(spec, manifest.total_frames, rng)
            trajectories.append(trajectory._replace(coords=trajectory.coords[-window:]))
        logger.debug("simulated %d %s trajectories", len(trajectories), split)
        dataset[split] = trajectories
    return dataset


def stack_trajectories(trajectories, dtype=torch.float32):
    # type: (Sequence[GeoTrajectory], torch.dtype) -> Tuple[Tensor, Tensor, Tensor]
    """Stack same-shaped trajectories into coords, node features, and dense adjacency batches."""
    if not trajectories:
        raise SimulationError("cannot stack an empty list of trajectories")
    n = trajectories[0].coords.shape[1]
    coords = torch.stack([t.coords for t in trajectories]).to(dtype)
    features = torch.stack([t.node_features for t in trajectories]).to(dtype)
    adjacency = torch.stack([edges_to_adjacency(t.edges, n, dtype) for t in trajectories])
    return coords, features, adjacency


def split_windows(
    coords,  # type: Tensor
    node_features,  # type: Tensor
    adjacency,  # type: Tensor
    cond_frames,  # type: int
    target_frames,  # type: int
    task=Task.FORECAST,  # type: Task
):
    # type: (...) -> TrajectoryWindows
    """Cut B x (T_c + T) x N x D trajectories into condition and target windows.

    For forecasting the first T_c frames condition the next T.  For interpolation the first
    T_c // 2 and the last T_c - T_c // 2 frames condition the T frames between them, and the tail
    frames sit after the target window on the shared timeline.
    """
    if coords.shape[-3] < cond_frames + target_frames:
        raise SimulationError("trajectories are shorter than the requested windows")
    if task == Task.FORECAST:
        condition = coords[..., :cond_frames, :, :]
        target = coords[..., cond_frames : cond_frames + target_frames, :, :]
        times = torch.arange(cond_frames) - cond_frames
    else:
        head = cond_frames // 2
        tail = cond_frames - head
        if head < 1:
            raise SimulationError("interpolation needs at least two condition frames")
        end = head + target_frames
        condition = torch.cat([coords[..., :head, :, :], coords[..., end : end + tail, :, :]], -3)
        target = coords[..., head:end, :, :]
        times = torch.cat([torch.arange(head) - head, torch.arange(tail) + target_frames])
    return TrajectoryWindows(
        target=target,
        condition=condition,
        condition_times=times,
        node_features=node_features,
        adjacency=adjacency,
    )
