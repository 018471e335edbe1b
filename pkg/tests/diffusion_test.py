import pytest
import torch

from geotdm.diffusion.compose import compose_long
from geotdm.diffusion.cond import (
    interpolate,
    interpolation_times,
    loss_cond,
    q_sample_cond,
    refine_trajectory,
    sample_cond,
)
from geotdm.diffusion.prior import mix_prior
from geotdm.diffusion.sampling import draw_chain_noise
from geotdm.diffusion.schedule import (
    check_step,
    describe,
    kl_term,
    kl_weight,
    make_linear_schedule,
    make_schedule_from_betas,
    posterior_mean_variance,
    reverse_mean,
)
from geotdm.diffusion.uncond import loss_uncond, q_sample_uncond, sample_uncond
from geotdm.egtn.model import parameter_groups
from geotdm.entities.config import PriorKind
from geotdm.exc import DiffusionError, NumericalError
from geotdm.geom import finite_diff_gradient, project_zero_com, random_rotation, rotate_translate
from tests.util import random_batch, random_model

B, T, T_C, N, D = 2, 3, 2, 4, 3

SCHEDULE = make_linear_schedule(6, 1e-2, 0.2)


def _chain_noise(seed):
    # type: (int) -> torch.Tensor
    generator = torch.Generator().manual_seed(seed)
    return draw_chain_noise((B, T, N, D), SCHEDULE.n_steps, generator, False, torch.float64)


def test_linear_schedule():
    # type: () -> None
    schedule = make_linear_schedule(1000, 1e-4, 2e-2)
    assert schedule.n_steps == 1000
    assert schedule.betas[0].item() == pytest.approx(1e-4)
    assert schedule.betas[-1].item() == pytest.approx(2e-2)
    assert bool((schedule.alpha_bars[1:] < schedule.alpha_bars[:-1]).all())
    assert torch.equal(schedule.variances, schedule.betas)
    assert schedule.alpha_bars[-1].item() < 1e-3
    assert "1000 steps" in describe(schedule)

    single = make_linear_schedule(1, 0.5, 0.5)
    assert single.betas.tolist() == [0.5]


def test_invalid_schedules():
    # type: () -> None
    with pytest.raises(DiffusionError):
        make_linear_schedule(0, 1e-4, 2e-2)
    with pytest.raises(DiffusionError):
        make_linear_schedule(10, 0.0, 2e-2)
    with pytest.raises(DiffusionError):
        make_schedule_from_betas(torch.tensor([0.1, 1.0]))
    with pytest.raises(DiffusionError):
        make_schedule_from_betas(torch.tensor([0.1, 0.2]), loss_weights=torch.ones(3))


def test_step_range():
    # type: () -> None
    check_step(1, SCHEDULE)
    check_step(torch.tensor([1, 6]), SCHEDULE)
    with pytest.raises(DiffusionError):
        check_step(0, SCHEDULE)
    with pytest.raises(DiffusionError):
        check_step(torch.tensor([3, 7]), SCHEDULE)
    x = torch.zeros(1, T, N, D, dtype=torch.float64)
    with pytest.raises(DiffusionError):
        q_sample_uncond(x, 7, x, SCHEDULE)


def test_posterior_at_first_step_is_x0():
    # type: () -> None
    x0, x_t, _, _ = random_batch(0, B, T, T, N)
    anchor = torch.full_like(x0, 0.5)
    mean, variance = posterior_mean_variance(x0, x_t, anchor, 1, SCHEDULE)
    assert torch.allclose(mean, x0, atol=1e-12)
    assert float(variance.max()) == 0.0


def test_reverse_mean_inverts_forward_noise():
    # type: () -> None
    """With the true noise, the reverse mean equals the posterior mean."""
    x0, anchor, _, _ = random_batch(1, B, T, T, N)
    noise = torch.randn(x0.shape, generator=torch.Generator().manual_seed(2), dtype=x0.dtype)
    for step in (2, 4, 6):
        x_t = q_sample_cond(x0, anchor, step, noise, SCHEDULE)
        expected, _ = posterior_mean_variance(x0, x_t, anchor, step, SCHEDULE)
        assert torch.allclose(reverse_mean(x_t, anchor, noise, step, SCHEDULE), expected)


@pytest.mark.parametrize("step", [2, 3, 6])
def test_kl_is_weighted_noise_error(step):
    # type: (int) -> None
    """The KL term differs from the weighted noise-prediction error only by a constant."""
    x0, anchor, _, _ = random_batch(3, B, T, T, N)
    eps, eps_pred, _, _ = random_batch(4, B, T, T, N)
    x_t = q_sample_cond(x0, anchor, step, eps, SCHEDULE)

    kl = kl_term(x0, x_t, anchor, step, eps_pred, SCHEDULE)
    baseline = kl_term(x0, x_t, anchor, step, eps, SCHEDULE)
    squared_error = torch.sum((eps - eps_pred) ** 2, dim=(1, 2, 3))
    assert torch.allclose(kl - baseline, kl_weight(step, SCHEDULE) * squared_error, rtol=1e-9)

    with pytest.raises(DiffusionError):
        kl_term(x0, x_t, anchor, 1, eps_pred, SCHEDULE)


def test_chain_noise():
    # type: () -> None
    noise = draw_chain_noise((B, T, N, D), 5, torch.Generator().manual_seed(0), subspace=True)
    assert noise.shape == (6, B, T, N, D)
    assert torch.equal(noise[-1], torch.zeros_like(noise[-1]))
    assert noise.mean(dim=(2, 3)).abs().max() < 1e-6


def test_uncond_loss_is_deterministic():
    # type: () -> None
    model = random_model(T)
    x0, _, h, adjacency = random_batch(5, B, T, T_C, N)
    first = loss_uncond(model, x0, h, adjacency, SCHEDULE, torch.Generator().manual_seed(1))
    second = loss_uncond(model, x0, h, adjacency, SCHEDULE, torch.Generator().manual_seed(1))
    assert first.item() == second.item()
    assert first.item() > 0

    # Translating the data does not change the loss of the subspace process.
    moved = loss_uncond(model, x0 + 3.0, h, adjacency, SCHEDULE, torch.Generator().manual_seed(1))
    assert moved.item() == pytest.approx(first.item(), rel=1e-9)

    bad = x0.clone()
    bad[0, 0, 0, 0] = float("nan")
    with pytest.raises(NumericalError):
        loss_uncond(model, bad, h, adjacency, SCHEDULE, torch.Generator().manual_seed(1))


def test_cond_loss_gradients_match_finite_differences():
    # type: () -> None
    model = random_model(T, seed=1)
    x0, x_cond, h, adjacency = random_batch(6, B, T, T_C, N)
    steps = torch.tensor([2, 5])
    noise = torch.randn(x0.shape, generator=torch.Generator().manual_seed(7), dtype=x0.dtype)

    def loss():
        # type: () -> torch.Tensor
        return loss_cond(
            model, x0, x_cond, h, adjacency, SCHEDULE, torch.Generator(), steps=steps, noise=noise
        )

    model.zero_grad()
    loss().backward()
    for name in ("gamma", "eta"):
        parameter = parameter_groups(model)[name][0]
        analytic = parameter.grad.detach().reshape(-1).clone()
        original = parameter.detach().clone()

        def as_function(values):
            # type: (torch.Tensor) -> float
            with torch.no_grad():
                parameter.copy_(values.reshape(original.shape))
                result = loss().item()
                parameter.copy_(original)
            return result

        numeric = finite_diff_gradient(as_function, original, h=1e-6)
        assert torch.allclose(analytic, numeric, rtol=1e-4, atol=1e-7)
        assert analytic.abs().max() > 0


def test_sample_uncond_is_equivariant_and_centered():
    # type: () -> None
    model = random_model(T, seed=2)
    _, _, h, adjacency = random_batch(8, B, T, T_C, N)
    noise = _chain_noise(9)
    seen = []

    sample = sample_uncond(
        model,
        T,
        h,
        adjacency,
        D,
        SCHEDULE,
        torch.Generator(),
        noise=noise,
        on_step=lambda step, x: seen.append(step),
    )
    assert sample.shape == (B, T, N, D)
    assert seen == [6, 5, 4, 3, 2, 1]
    assert sample.mean(dim=(1, 2)).abs().max() < 1e-10

    rotation = random_rotation(D, torch.Generator().manual_seed(10))
    rotated = sample_uncond(
        model,
        T,
        h,
        adjacency,
        D,
        SCHEDULE,
        torch.Generator(),
        noise=rotate_translate(noise, rotation),
    )
    assert torch.allclose(rotated, rotate_translate(sample, rotation), atol=1e-9)


@pytest.mark.parametrize("prior", [PriorKind.LEARNABLE, PriorKind.LAST_FRAME])
def test_sample_cond_is_equivariant(prior):
    # type: (PriorKind) -> None
    model = random_model(T, prior, seed=3)
    _, x_cond, h, adjacency = random_batch(11, B, T, T_C, N)
    noise = _chain_noise(12)
    rotation = random_rotation(D, torch.Generator().manual_seed(13))
    translation = torch.tensor([1.0, -2.0, 0.5], dtype=torch.float64)

    sample = sample_cond(model, x_cond, h, adjacency, T, SCHEDULE, torch.Generator(), noise=noise)
    moved = sample_cond(
        model,
        rotate_translate(x_cond, rotation, translation),
        h,
        adjacency,
        T,
        SCHEDULE,
        torch.Generator(),
        noise=rotate_translate(noise, rotation),
    )
    assert sample.shape == (B, T, N, D)
    assert torch.allclose(moved, rotate_translate(sample, rotation, translation), atol=1e-9)

    with pytest.raises(DiffusionError):
        sample_cond(model, x_cond[:, :0], h, adjacency, T, SCHEDULE, torch.Generator())


def test_prior_anchor_follows_condition_translations():
    # type: () -> None
    generator = torch.Generator().manual_seed(21)
    x_hat = torch.randn(B, T_C + 1, N, D, generator=generator, dtype=torch.float64)
    scores = torch.randn(B, T_C + 1, N, generator=generator, dtype=torch.float64)
    gamma = torch.randn(T, generator=generator, dtype=torch.float64)
    prior = mix_prior(x_hat, scores, gamma)
    sums = prior.weights.sum(dim=2)
    assert torch.allclose(sums, torch.ones_like(sums), atol=1e-12)

    # One translation per condition frame moves the anchor by the weighted sum of them.
    shifts = torch.randn(B, T_C + 1, 1, D, generator=generator, dtype=torch.float64)
    moved = mix_prior(x_hat + shifts, scores, gamma)
    expected = torch.einsum("btsn,bsnd->btnd", prior.weights, shifts.expand(x_hat.shape))
    assert torch.allclose(moved.anchor, prior.anchor + expected, atol=1e-10)
    assert torch.equal(moved.weights, prior.weights)

    # A translation shared by every frame moves the anchor by exactly that translation.
    translation = torch.tensor([1.0, -2.0, 0.5], dtype=torch.float64)
    shared = mix_prior(x_hat + translation, scores, gamma)
    assert torch.allclose(shared.anchor, prior.anchor + translation, atol=1e-10)


@pytest.mark.parametrize("prior", [PriorKind.LEARNABLE, PriorKind.COM, PriorKind.LAST_FRAME])
def test_cond_loss_is_translation_invariant(prior):
    # type: (PriorKind) -> None
    model = random_model(T, prior, seed=5)
    x0, x_cond, h, adjacency = random_batch(22, B, T, T_C, N)
    steps = torch.tensor([1, 4])
    noise = torch.randn(x0.shape, generator=torch.Generator().manual_seed(23), dtype=x0.dtype)
    translation = torch.tensor([3.0, -1.0, 2.5], dtype=torch.float64)

    def loss(x0, x_cond):
        return loss_cond(
            model, x0, x_cond, h, adjacency, SCHEDULE, torch.Generator(), steps=steps, noise=noise
        )

    first = loss(x0, x_cond)
    moved = loss(x0 + translation, x_cond + translation)
    assert first.item() > 0
    assert moved.item() == pytest.approx(first.item(), rel=1e-9)


def test_sampling_is_reproducible():
    # type: () -> None
    model = random_model(T, seed=4)
    _, x_cond, h, adjacency = random_batch(14, B, T, T_C, N)
    first = sample_cond(model, x_cond, h, adjacency, T, SCHEDULE, torch.Generator().manual_seed(1))
    again = sample_cond(model, x_cond, h, adjacency, T, SCHEDULE, torch.Generator().manual_seed(1))
    other = sample_cond(model, x_cond, h, adjacency, T, SCHEDULE, torch.Generator().manual_seed(2))
    assert torch.equal(first, again)
    assert not torch.equal(first, other)


def test_interpolate():
    # type: () -> None
    assert interpolation_times(2, 1, 3).tolist() == [-2, -1, 3]

    model = random_model(T, seed=5)
    _, x_cond, h, adjacency = random_batch(15, B, T, T_C, N)
    middle = interpolate(
        model, x_cond[:, :1], x_cond[:, 1:], T, h, adjacency, SCHEDULE, torch.Generator()
    )
    assert middle.shape == (B, T, N, D)

    with pytest.raises(DiffusionError):
        interpolate(
            model, x_cond[:, :0], x_cond, T, h, adjacency, SCHEDULE, torch.Generator()
        )


def test_refine_trajectory():
    # type: () -> None
    model = random_model(T, seed=6)
    x_init, x_cond, h, adjacency = random_batch(16, B, T, T_C, N)

    unchanged = refine_trajectory(model, x_init, x_cond, h, adjacency, 0, SCHEDULE, None)
    assert torch.equal(unchanged, x_init)

    refined = refine_trajectory(
        model, x_init, x_cond, h, adjacency, 3, SCHEDULE, torch.Generator().manual_seed(0)
    )
    assert refined.shape == x_init.shape
    assert not torch.equal(refined, x_init)

    with pytest.raises(DiffusionError):
        refine_trajectory(model, x_init, x_cond, h, adjacency, 7, SCHEDULE, torch.Generator())


def test_compose_long():
    # type: () -> None
    uncond = random_model(T, seed=7)
    cond = random_model(T, seed=8)
    first, _, h, adjacency = random_batch(17, B, T, T_C, N)
    generator = torch.Generator().manual_seed(0)

    long = compose_long(uncond, cond, 3, T, h, adjacency, D, SCHEDULE, generator)
    assert long.shape == (B, 3 * T, N, D)
    assert long[:, :T].mean(dim=(1, 2)).abs().max() < 1e-10

    seeded = compose_long(None, cond, 2, T, h, adjacency, D, SCHEDULE, generator, first, T_C)
    assert torch.equal(seeded[:, :T], first)
    assert seeded.shape == (B, 2 * T, N, D)

    with pytest.raises(DiffusionError):
        compose_long(None, cond, 2, T, h, adjacency, D, SCHEDULE, generator)
    with pytest.raises(DiffusionError):
        compose_long(uncond, cond, 0, T, h, adjacency, D, SCHEDULE, generator)
    with pytest.raises(DiffusionError):
        compose_long(None, cond, 2, T, h, adjacency, D, SCHEDULE, generator, first[:, :1])


def test_projection_keeps_uncond_forward_process_in_subspace():
    # type: () -> None
    x0 = project_zero_com(random_batch(18, B, T, T_C, N)[0])
    noise = draw_chain_noise((B, T, N, D), 1, torch.Generator().manual_seed(0), True)[0]
    x_t = q_sample_uncond(x0, torch.tensor([2, 5]), noise.to(x0), SCHEDULE)
    assert x_t.mean(dim=(1, 2)).abs().max() < 1e-6
