import pytest
import torch

from geotdm.egtn.embedding import sinusoidal_embedding
from geotdm.egtn.layers import Egcl, TemporalConvolution
from geotdm.egtn.model import (
    condition_times,
    Egtn,
    EgtnModel,
    eps_cond,
    eps_uncond,
    parameter_groups,
    target_times,
)
from geotdm.entities.config import (
    InvalidConfigException,
    PriorKind,
    TemporalEncoding,
    TemporalMixing,
)
from geotdm.exc import DiffusionError, GeometryError, NumericalError
from geotdm.geom import random_rigid_motion, rotate_translate
from tests.util import random_batch, random_model, randomize_parameters, TINY_CONFIG as CONFIG

B, T, T_C, N, D = 2, 4, 3, 5, 3


def _inputs(seed):
    return random_batch(seed, B, T, T_C, N, D)


def _model(prior=PriorKind.LEARNABLE, seed=0):
    return random_model(T, prior, seed)


def _variant(seed=0, **changes):
    model = EgtnModel(CONFIG._replace(**changes), T).double()
    randomize_parameters(model, seed)
    return model


CONV = {"temporal_mixing": TemporalMixing.CONV}
ABSOLUTE = {"temporal_encoding": TemporalEncoding.ABSOLUTE}
NO_EDGES = {"edge_features": False}
NON_EQUIVARIANT = {"equivariant": False}


def test_sinusoidal_embedding():
    # type: () -> None
    embedding = sinusoidal_embedding(torch.tensor([0, 3]), 6)
    assert embedding.shape == (2, 6)
    assert embedding.dtype == torch.float64
    assert embedding[0].tolist() == [0.0, 1.0, 0.0, 1.0, 0.0, 1.0]
    assert abs(embedding[1, 0].item() - torch.sin(torch.tensor(3.0)).item()) < 1e-6

    with pytest.raises(GeometryError):
        sinusoidal_embedding(torch.tensor([1]), 5)


def test_invalid_config():
    # type: () -> None
    with pytest.raises(InvalidConfigException):
        Egtn(CONFIG._replace(hidden_dim=6, n_heads=4))
    with pytest.raises(InvalidConfigException):
        Egtn(CONFIG._replace(time_emb_dim=3))
    with pytest.raises(InvalidConfigException):
        Egtn(
            CONFIG._replace(
                temporal_mixing=TemporalMixing.CONV,
                temporal_encoding=TemporalEncoding.ABSOLUTE,
            )
        )


def test_shapes_and_untrained_identity():
    # type: () -> None
    x, x_cond, h, adjacency = _inputs(0)
    network = Egtn(CONFIG).double()
    out, features = network(x, h, adjacency, torch.tensor([1, 5]), x_cond)
    assert out.shape == x.shape
    assert features.shape == (B, T, N, CONFIG.hidden_dim)
    # The coordinate gates start at zero, so a fresh network leaves coordinates alone.
    assert torch.equal(out, x)


def test_denoiser_is_equivariant():
    # type: () -> None
    x, x_cond, h, adjacency = _inputs(1)
    model = _model()
    step = torch.tensor([3, 7])
    g = random_rigid_motion(D, torch.Generator().manual_seed(2))

    eps = eps_cond(model, x, x_cond, h, adjacency, step)
    moved = eps_cond(
        model,
        rotate_translate(x, *g),
        rotate_translate(x_cond, *g),
        h,
        adjacency,
        step,
    )
    assert torch.allclose(moved, rotate_translate(eps, g.rotation), atol=1e-9)

    eps = eps_uncond(model, x, h, adjacency, step).values
    moved = eps_uncond(model, rotate_translate(x, *g), h, adjacency, step).values
    assert torch.allclose(moved, rotate_translate(eps, g.rotation), atol=1e-9)
    assert eps.mean(dim=(1, 2)).abs().max() < 1e-10


def test_denoiser_is_permutation_equivariant():
    # type: () -> None
    x, x_cond, h, adjacency = _inputs(3)
    model = _model(seed=4)
    step = torch.tensor([2, 2])
    permutation = torch.tensor([4, 2, 0, 1, 3])

    eps = eps_cond(model, x, x_cond, h, adjacency, step)
    permuted = eps_cond(
        model,
        x[:, :, permutation],
        x_cond[:, :, permutation],
        h[:, permutation],
        adjacency[:, permutation][:, :, permutation],
        step,
    )
    assert torch.allclose(permuted, eps[:, :, permutation], atol=1e-9)


def test_non_finite_output():
    # type: () -> None
    x, _, h, adjacency = _inputs(0)
    x[0, 0, 0, 0] = float("inf")
    with pytest.raises(NumericalError):
        _model().denoiser(x, h, adjacency)


@pytest.mark.parametrize("prior", list(PriorKind), ids=lambda p: p.value)
def test_prior_kinds(prior):
    # type: (PriorKind) -> None
    _, x_cond, h, adjacency = _inputs(5)
    model = _model(prior)
    result = model.prior(x_cond, h, adjacency)
    assert result.anchor.shape == (B, T, N, D)
    assert result.weights.shape == (B, T, T_C, N)

    if prior == PriorKind.ZERO:
        assert torch.equal(result.anchor, torch.zeros_like(result.anchor))
        return
    sums = result.weights.sum(dim=2)
    assert torch.allclose(sums, torch.ones_like(sums), atol=1e-12)

    g = random_rigid_motion(D, torch.Generator().manual_seed(6))
    moved = model.prior(rotate_translate(x_cond, *g), h, adjacency)
    assert torch.allclose(moved.anchor, rotate_translate(result.anchor, *g), atol=1e-9)


def test_untrained_learnable_prior_is_processed_last_frame():
    # type: () -> None
    _, x_cond, h, adjacency = _inputs(7)
    model = EgtnModel(CONFIG, T).double()
    assert model.gamma is not None
    assert torch.equal(model.gamma, torch.zeros(T, dtype=torch.float64))

    result = model.prior(x_cond, h, adjacency)
    x_hat, _ = model.process_condition(x_cond, h, adjacency)
    for t in range(T):
        assert torch.allclose(result.anchor[:, t], x_hat[:, -1], atol=1e-12)


def test_prior_errors():
    # type: () -> None
    _, x_cond, h, adjacency = _inputs(0)
    model = _model()
    with pytest.raises(DiffusionError):
        model.prior(x_cond, h, adjacency, n_frames=T + 1)
    with pytest.raises(DiffusionError):
        model.prior(x_cond[:, :0], h, adjacency)


def test_parameter_groups():
    # type: () -> None
    model = _model()
    groups = parameter_groups(model)
    counted = sum(p.numel() for group in groups.values() for p in group)
    assert counted == sum(p.numel() for p in model.parameters())
    assert groups["gamma"][0] is model.gamma

    plain = _model(PriorKind.COM)
    assert parameter_groups(plain)["eta"] == []
    assert parameter_groups(plain)["gamma"] == []


def test_condition_times():
    # type: () -> None
    assert condition_times(3).tolist() == [-3, -2, -1]


@pytest.mark.parametrize(
    "changes",
    [CONV, ABSOLUTE, NO_EDGES, NON_EQUIVARIANT],
    ids=["conv", "absolute", "no_edges", "non_equivariant"],
)
def test_variants_start_as_identity(changes):
    # type: (dict) -> None
    x, x_cond, h, adjacency = _inputs(0)
    network = Egtn(CONFIG._replace(**changes)).double()
    out, _ = network(x, h, adjacency, torch.tensor([1, 5]), x_cond)
    assert torch.equal(out, x)


@pytest.mark.parametrize(
    "changes", [CONV, ABSOLUTE, NO_EDGES], ids=["conv", "absolute", "no_edges"]
)
def test_variants_are_equivariant(changes):
    # type: (dict) -> None
    x, x_cond, h, adjacency = _inputs(8)
    model = _variant(9, **changes)
    step = torch.tensor([4, 1])
    g = random_rigid_motion(D, torch.Generator().manual_seed(10))

    eps = eps_cond(model, x, x_cond, h, adjacency, step)
    moved = eps_cond(
        model, rotate_translate(x, *g), rotate_translate(x_cond, *g), h, adjacency, step
    )
    assert torch.allclose(moved, rotate_translate(eps, g.rotation), atol=1e-9)


def test_non_equivariant_variant():
    # type: () -> None
    x, x_cond, h, adjacency = _inputs(8)
    model = _variant(9, **NON_EQUIVARIANT)
    step = torch.tensor([4, 1])
    g = random_rigid_motion(D, torch.Generator().manual_seed(10))

    eps = eps_cond(model, x, x_cond, h, adjacency, step)
    moved = eps_cond(
        model, rotate_translate(x, *g), rotate_translate(x_cond, *g), h, adjacency, step
    )
    assert not torch.allclose(moved, rotate_translate(eps, g.rotation), atol=1e-6)


def _shifted(model, shift):
    x, x_cond, h, adjacency = _inputs(11)
    out, _ = model.denoiser(
        x,
        h,
        adjacency,
        torch.tensor([2, 6]),
        x_cond,
        cond_times=condition_times(T_C) + shift,
        times=target_times(T) + shift,
    )
    return out


@pytest.mark.parametrize("changes", [{}, CONV], ids=["attention", "conv"])
def test_relative_time_is_shift_invariant(changes):
    # type: (dict) -> None
    model = _variant(12, **changes)
    assert torch.allclose(_shifted(model, 0), _shifted(model, 7), atol=1e-10)


def test_absolute_time_is_not_shift_invariant():
    # type: () -> None
    model = _variant(12, **ABSOLUTE)
    assert not torch.allclose(_shifted(model, 0), _shifted(model, 7), atol=1e-6)


def test_convolution_window():
    # type: () -> None
    generator = torch.Generator().manual_seed(13)
    x = torch.randn(1, 4, 3, D, generator=generator, dtype=torch.float64)
    h = torch.randn(1, 4, 3, CONFIG.hidden_dim, generator=generator, dtype=torch.float64)
    layer = TemporalConvolution(CONFIG.hidden_dim, radius=1).double()
    randomize_parameters(layer, 14)

    x_out, h_out = layer(x, h, target_times(4))
    h_far = h.clone()
    h_far[:, 3] += 1.0
    x_moved, h_moved = layer(x, h_far, target_times(4))
    # Frame 3 is out of reach of frame 0 and a neighbour of frame 2.
    assert torch.equal(x_moved[:, 0], x_out[:, 0])
    assert torch.equal(h_moved[:, 0], h_out[:, 0])
    assert not torch.allclose(x_moved[:, 2], x_out[:, 2])

    with pytest.raises(GeometryError):
        TemporalConvolution(CONFIG.hidden_dim, radius=-1)


def test_edge_attributes_enter_messages():
    # type: () -> None
    generator = torch.Generator().manual_seed(15)
    x = torch.randn(1, 2, 3, D, generator=generator, dtype=torch.float64)
    h = torch.randn(1, 2, 3, CONFIG.hidden_dim, generator=generator, dtype=torch.float64)
    adjacency = (1.0 - torch.eye(3, dtype=torch.float64)).unsqueeze(0)
    charges = torch.tensor([[1.0, -1.0, 1.0]], dtype=torch.float64).unsqueeze(-1)
    layer = Egcl(CONFIG.hidden_dim, edge_dim=1).double()
    randomize_parameters(layer, 16)
    assert layer.phi_m[0].in_features == 2 * CONFIG.hidden_dim + 2

    attracting = charges.unsqueeze(-2) * charges.unsqueeze(-3)
    x_a, h_a = layer(x, h, adjacency, attracting)
    x_b, h_b = layer(x, h, adjacency, torch.ones_like(attracting))
    assert not torch.allclose(x_a, x_b)
    assert not torch.allclose(h_a, h_b)

    with pytest.raises(GeometryError):
        layer(x, h, adjacency)

    plain = Egtn(CONFIG._replace(**NO_EDGES))
    assert plain.layers[0].egcl.phi_m[0].in_features == 2 * CONFIG.hidden_dim + 1
