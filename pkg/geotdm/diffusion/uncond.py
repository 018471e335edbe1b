"""Unconditional diffusion on the zero-CoM subspace."""

from typing import TYPE_CHECKING

import torch

from geotdm.diffusion.sampling import draw_chain_noise, reverse_chain
from geotdm.diffusion.schedule import check_step, gather, signal_and_noise_scales
from geotdm.egtn.model import eps_uncond
from geotdm.exc import NumericalError
from geotdm.geom import project_zero_com, sample_subspace_gaussian

if TYPE_CHECKING:
    from geotdm.diffusion.sampling import StepCallback
    from geotdm.diffusion.schedule import Step
    from geotdm.egtn.model import EgtnModel
    from geotdm.entities.diffusion import NoiseSchedule
    from torch import Tensor
    from typing import Optional


def q_sample_uncond(x0, step, noise, schedule):
    # type: (Tensor, Step, Tensor, NoiseSchedule) -> Tensor
    """x_tau = sqrt(alpha_bar) x_0 + sqrt(1 - alpha_bar) eps for subspace x_0 and eps."""
    signal, scale = signal_and_noise_scales(step, schedule, x0)
    return signal * x0 + scale * noise


def random_steps(batch, schedule, generator):
    # type: (int, NoiseSchedule, torch.Generator) -> Tensor
    return torch.randint(1, schedule.n_steps + 1, (batch,), generator=generator)


def mse_loss(noise, predicted, steps, schedule):
    # type: (Tensor, Tensor, Tensor, NoiseSchedule) -> Tensor
    weights = gather(schedule.loss_weights, steps, noise).reshape(-1)
    per_element = torch.mean((noise - predicted) ** 2, dim=(-3, -2, -1))
    loss = torch.mean(weights * per_element)
    if not bool(torch.isfinite(loss)):
        raise NumericalError("diffusion loss is not finite")
    return loss


def loss_uncond(
    model,  # type: EgtnModel
    x0,  # type: Tensor
    h,  # type: Tensor
    adjacency,  # type: Tensor
    schedule,  # type: NoiseSchedule
    generator,  # type: torch.Generator
    steps=None,  # type: Optional[Tensor]
    noise=None,  # type: Optional[Tensor]
):
    # type: (...) -> Tensor
    """Noise-prediction loss of the unconditional model on a B x T x N x D batch.

    The batch is projected onto the zero-CoM subspace first.  steps and noise are drawn from
    generator unless given.
    """
    b, t, n, d = x0.shape
    x0 = project_zero_com(x0)
    if steps is None:
        steps = random_steps(b, schedule, generator).to(x0.device)
    check_step(steps, schedule)
    if noise is None:
        noise = sample_subspace_gaussian(t, n, d, generator, (b,), x0.dtype).values.to(x0)
    x_t = q_sample_uncond(x0, steps, noise, schedule)
    predicted = eps_uncond(model, x_t, h, adjacency, steps).values
    return mse_loss(noise, predicted, steps, schedule)


def sample_uncond(
    model,  # type: EgtnModel
    n_frames,  # type: int
    h,  # type: Tensor
    adjacency,  # type: Tensor
    dim,  # type: int
    schedule,  # type: NoiseSchedule
    generator,  # type: torch.Generator
    noise=None,  # type: Optional[Tensor]
    on_step=None,  # type: Optional[StepCallback]
):
    # type: (...) -> Tensor
    """Draw B x T x N x D trajectories, one per row of h, all with zero global CoM."""
    shape = (h.shape[0], n_frames, h.shape[1], dim)
    dtype = h.dtype
    if noise is None:
        noise = draw_chain_noise(shape, schedule.n_steps, generator, True, dtype)
    x_start = project_zero_com(noise[0].to(h))
    anchor = torch.zeros_like(x_start)

    def eps_fn(x, steps):
        # type: (Tensor, Tensor) -> Tensor
        return eps_uncond(model, x, h, adjacency, steps).values

    with torch.no_grad():
        return reverse_chain(
            eps_fn, x_start, anchor, schedule.n_steps, schedule, noise[1:], True, on_step
        )
