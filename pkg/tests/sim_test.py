import numpy as np
import pytest
import torch

from geotdm.entities.config import Task
from geotdm.entities.system import (
    DatasetManifest,
    DEFAULT_SYSTEM_SPECS,
    InitialState,
    SystemKind,
)
from geotdm.exc import InvalidManifestError, SimulationError
from geotdm.sim import (
    build_dataset,
    integrate,
    kinetic_energy,
    potential_energy,
    sample_initial_state,
    simulate,
    simulate_charged,
    simulate_spring,
    split_windows,
    stack_trajectories,
    total_momentum,
)

CHARGED = DEFAULT_SYSTEM_SPECS[SystemKind.CHARGED]
SPRING = DEFAULT_SYSTEM_SPECS[SystemKind.SPRING]
GRAVITY = DEFAULT_SYSTEM_SPECS[SystemKind.GRAVITY]

TINY_MANIFEST = DatasetManifest(
    n_train=3, n_valid=2, n_test=2, total_frames=6, cond_frames=2, target_frames=3, seed=4
)


def _energy(spec, state, positions, velocities):
    return potential_energy(spec, state, positions) + kinetic_energy(state, velocities)


@pytest.mark.parametrize("spec", [CHARGED, SPRING, GRAVITY], ids=lambda s: s.kind.value)
def test_energy_and_momentum_are_conserved(spec):
    # type: (object) -> None
    spec = spec._replace(dt=0.01, substeps=20)  # type: ignore
    state = sample_initial_state(spec, np.random.default_rng(0))
    positions, velocities = integrate(spec, state, 50)

    start = _energy(spec, state, positions[0], velocities[0])
    end = _energy(spec, state, positions[-1], velocities[-1])
    assert abs(end - start) <= 1e-3 * max(1.0, abs(start))

    momentum = total_momentum(state, velocities[-1])
    assert np.allclose(momentum, total_momentum(state, velocities[0]), atol=1e-9)


def test_free_particles_move_in_straight_lines():
    # type: () -> None
    spec = SPRING._replace(n_bodies=2)
    state = InitialState(
        positions=np.array([[0.0, 0.0, 0.0], [3.0, 0.0, 0.0]]),
        velocities=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
        masses=np.ones(2),
        charges=np.ones(2),
        adjacency=np.zeros((2, 2)),
    )
    trajectory = simulate_spring(spec, 4, np.random.default_rng(0), initial=state)
    assert torch.allclose(
        trajectory.coords[3, 0], torch.tensor([3 * spec.dt, 0.0, 0.0], dtype=torch.float64)
    )
    assert trajectory.edges.numel() == 0


def test_opposite_charges_attract():
    # type: () -> None
    spec = CHARGED._replace(n_bodies=2)
    state = InitialState(
        positions=np.array([[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]),
        velocities=np.zeros((2, 3)),
        masses=np.ones(2),
        charges=np.array([1.0, -1.0]),
        adjacency=1.0 - np.eye(2),
    )
    trajectory = simulate_charged(spec, 3, np.random.default_rng(0), initial=state)
    gap = trajectory.coords[:, 1, 0] - trajectory.coords[:, 0, 0]
    assert gap[-1] < gap[0]


def test_overlapping_particles_without_softening():
    # type: () -> None
    spec = CHARGED._replace(n_bodies=2, softening=0.0)
    state = InitialState(
        positions=np.zeros((2, 3)),
        velocities=np.zeros((2, 3)),
        masses=np.ones(2),
        charges=np.ones(2),
        adjacency=1.0 - np.eye(2),
    )
    with pytest.raises(SimulationError):
        simulate_charged(spec, 3, np.random.default_rng(0), initial=state)


def test_wrong_system_kind():
    # type: () -> None
    with pytest.raises(SimulationError):
        simulate_charged(SPRING, 3, np.random.default_rng(0))
    with pytest.raises(SimulationError):
        integrate(CHARGED, sample_initial_state(CHARGED, np.random.default_rng(0)), 0)


def test_initial_state_distributions():
    # type: () -> None
    charged = sample_initial_state(CHARGED, np.random.default_rng(1))
    assert set(np.unique(charged.charges)) <= {-1.0, 1.0}
    assert np.all(charged.masses == 1.0)

    spring = sample_initial_state(SPRING, np.random.default_rng(1))
    assert np.all((spring.masses >= SPRING.min_mass) & (spring.masses <= SPRING.max_mass))
    assert np.array_equal(spring.adjacency, spring.adjacency.T)
    assert np.all(np.diag(spring.adjacency) == 0)


def test_simulate_shapes():
    # type: () -> None
    trajectory = simulate(GRAVITY, 5, np.random.default_rng(2))
    assert trajectory.coords.shape == (5, GRAVITY.n_bodies, 3)
    assert trajectory.coords.dtype == torch.float64
    assert trajectory.node_features.shape == (GRAVITY.n_bodies, 1)
    assert trajectory.edges.shape == (GRAVITY.n_bodies * (GRAVITY.n_bodies - 1), 2)
    assert trajectory.dt == GRAVITY.dt


def test_build_dataset_is_deterministic():
    # type: () -> None
    spec = CHARGED._replace(n_bodies=3, substeps=2)
    first = build_dataset(spec, TINY_MANIFEST)
    second = build_dataset(spec, TINY_MANIFEST)

    assert [len(first[split]) for split in ("train", "valid", "test")] == [3, 2, 2]
    for split in first:
        for a, b in zip(first[split], second[split]):
            assert torch.equal(a.coords, b.coords)
            assert torch.equal(a.node_features, b.node_features)
    assert first["train"][0].coords.shape == (5, 3, 3)
    assert not torch.equal(first["train"][0].coords, first["train"][1].coords)

    other = build_dataset(spec, TINY_MANIFEST._replace(seed=5))
    assert not torch.equal(first["train"][0].coords, other["train"][0].coords)

    with pytest.raises(InvalidManifestError):
        build_dataset(spec, TINY_MANIFEST._replace(total_frames=4))


def test_split_windows_forecast():
    # type: () -> None
    coords = torch.arange(6, dtype=torch.float32).reshape(1, 6, 1, 1).expand(2, 6, 2, 3)
    windows = split_windows(coords, torch.ones(2, 2, 1), torch.ones(2, 2, 2), 2, 3)
    assert windows.condition[0, :, 0, 0].tolist() == [0.0, 1.0]
    assert windows.target[0, :, 0, 0].tolist() == [2.0, 3.0, 4.0]
    assert windows.condition_times.tolist() == [-2, -1]


def test_split_windows_interpolate():
    # type: () -> None
    coords = torch.arange(7, dtype=torch.float32).reshape(1, 7, 1, 1).expand(1, 7, 2, 3)
    windows = split_windows(
        coords, torch.ones(1, 2, 1), torch.ones(1, 2, 2), 3, 3, task=Task.INTERPOLATE
    )
    assert windows.condition[0, :, 0, 0].tolist() == [0.0, 4.0, 5.0]
    assert windows.target[0, :, 0, 0].tolist() == [1.0, 2.0, 3.0]
    assert windows.condition_times.tolist() == [-1, 3, 4]

    with pytest.raises(SimulationError):
        split_windows(coords, torch.ones(1, 2, 1), torch.ones(1, 2, 2), 1, 3, Task.INTERPOLATE)
    with pytest.raises(SimulationError):
        split_windows(coords, torch.ones(1, 2, 1), torch.ones(1, 2, 2), 4, 4)


def test_stack_trajectories():
    # type: () -> None
    spec = SPRING._replace(n_bodies=4)
    trajectories = [simulate(spec, 3, np.random.default_rng(seed)) for seed in range(3)]
    coords, features, adjacency = stack_trajectories(trajectories)
    assert coords.shape == (3, 3, 4, 3)
    assert coords.dtype == torch.float32
    assert features.shape == (3, 4, 1)
    assert adjacency.shape == (3, 4, 4)
    assert torch.all(torch.diagonal(adjacency, dim1=1, dim2=2) == 0)
    assert torch.equal(adjacency, adjacency.transpose(1, 2))

    with pytest.raises(SimulationError):
        stack_trajectories([])
