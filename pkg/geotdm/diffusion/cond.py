"""Conditional diffusion about the equivariant prior anchor."""

from typing import TYPE_CHECKING

import torch

from geotdm.diffusion.sampling import draw_chain_noise, reverse_chain
from geotdm.diffusion.schedule import check_step, signal_and_noise_scales
from geotdm.diffusion.uncond import mse_loss, random_steps
from geotdm.egtn.model import condition_times, eps_cond
from geotdm.exc import DiffusionError

if TYPE_CHECKING:
    from geotdm.diffusion.sampling import StepCallback
    from geotdm.diffusion.schedule import Step
    from geotdm.egtn.model import EgtnModel
    from geotdm.entities.diffusion import NoiseSchedule
    from torch import Tensor
    from typing import Optional


def q_sample_cond(x0, anchor, step, noise, schedule):
    # type: (Tensor, Tensor, Step, Tensor, NoiseSchedule) -> Tensor
    """x_tau = sqrt(alpha_bar) (x_0 - x_r) + x_r + sqrt(1 - alpha_bar) eps."""
    signal, scale = signal_and_noise_scales(step, schedule, x0)
    return signal * (x0 - anchor) + anchor + scale * noise


def loss_cond(
    model,  # type: EgtnModel
    x0,  # type: Tensor
    x_cond,  # type: Tensor
    h,  # type: Tensor
    adjacency,  # type: Tensor
    schedule,  # type: NoiseSchedule
    generator,  # type: torch.Generator
    cond_times=None,  # type: Optional[Tensor]
    steps=None,  # type: Optional[Tensor]
    noise=None,  # type: Optional[Tensor]
):
    # type: (...) -> Tensor
    """Noise-prediction loss of the conditional model.

    The prior is rebuilt with gradients on every call, so the loss reaches the prior parameters
    through the noised input.
    """
    b = x0.shape[0]
    if steps is None:
        steps = random_steps(b, schedule, generator).to(x0.device)
    check_step(steps, schedule)
    if noise is None:
        noise = torch.randn(x0.shape, generator=generator, dtype=torch.float64).to(x0)
    prior = model.prior(x_cond, h, adjacency, x0.shape[1], cond_times)
    x_t = q_sample_cond(x0, prior.anchor, steps, noise, schedule)
    predicted = eps_cond(model, x_t, x_cond, h, adjacency, steps, cond_times)
    return mse_loss(noise, predicted, steps, schedule)


def _conditional_chain(
    model,  # type: EgtnModel
    x_start,  # type: Tensor
    anchor,  # type: Tensor
    first_step,  # type: int
    x_cond,  # type: Tensor
    h,  # type: Tensor
    adjacency,  # type: Tensor
    schedule,  # type: NoiseSchedule
    noise,  # type: Tensor
    cond_times,  # type: Optional[Tensor]
    on_step,  # type: Optional[StepCallback]
):
    # type: (...) -> Tensor
    def eps_fn(x, steps):
        # type: (Tensor, Tensor) -> Tensor
        return eps_cond(model, x, x_cond, h, adjacency, steps, cond_times)

    return reverse_chain(eps_fn, x_start, anchor, first_step, schedule, noise, False, on_step)


def sample_cond(
    model,  # type: EgtnModel
    x_cond,  # type: Tensor
    h,  # type: Tensor
    adjacency,  # type: Tensor
    n_frames,  # type: int
    schedule,  # type: NoiseSchedule
    generator,  # type: torch.Generator
    cond_times=None,  # type: Optional[Tensor]
    noise=None,  # type: Optional[Tensor]
    on_step=None,  # type: Optional[StepCallback]
):
    # type: (...) -> Tensor
    """Draw n_frames target frames given B x T_c x N x D condition frames.

    Starts from x_T = x_r + eps and runs the full reverse chain, one network call per step.
    """
    if x_cond.shape[1] < 1:
        raise DiffusionError("conditional sampling needs at least one condition frame")
    shape = (x_cond.shape[0], n_frames) + tuple(x_cond.shape[2:])
    if noise is None:
        noise = draw_chain_noise(shape, schedule.n_steps, generator, False, x_cond.dtype)
    with torch.no_grad():
        anchor = model.prior(x_cond, h, adjacency, n_frames, cond_times).anchor
        x_start = anchor + noise[0].to(anchor)
        return _conditional_chain(
            model,
            x_start,
            anchor,
            schedule.n_steps,
            x_cond,
            h,
            adjacency,
            schedule,
            noise[1:],
            cond_times,
            on_step,
        )


def interpolation_times(n_head, n_tail, n_mid):
    # type: (int, int, int) -> Tensor
    """Head frames precede target frame 0; tail frames follow the last target frame."""
    return torch.cat([condition_times(n_head), torch.arange(n_tail) + n_mid])


def interpolate(
    model,  # type: EgtnModel
    head,  # type: Tensor
    tail,  # type: Tensor
    n_mid,  # type: int
    h,  # type: Tensor
    adjacency,  # type: Tensor
    schedule,  # type: NoiseSchedule
    generator,  # type: torch.Generator
    noise=None,  # type: Optional[Tensor]
):
    # type: (...) -> Tensor
    """Generate the n_mid frames between head and tail frames, excluding both."""
    if head.shape[1] < 1 or tail.shape[1] < 1:
        raise DiffusionError("interpolation needs head and tail frames")
    x_cond = torch.cat([head, tail], dim=1)
    times = interpolation_times(head.shape[1], tail.shape[1], n_mid).to(head.device)
    return sample_cond(
        model, x_cond, h, adjacency, n_mid, schedule, generator, times, noise=noise
    )


def refine_trajectory(
    model,  # type: EgtnModel
    x_init,  # type: Tensor
    x_cond,  # type: Tensor
    h,  # type: Tensor
    adjacency,  # type: Tensor
    k_steps,  # type: int
    schedule,  # type: NoiseSchedule
    generator,  # type: torch.Generator
    cond_times=None,  # type: Optional[Tensor]
    noise=None,  # type: Optional[Tensor]
):
    # type: (...) -> Tensor
    """Diffuse x_init forward k_steps steps about the prior anchor, then denoise it back.

    noise, if given, holds k_steps + 1 draws: the forward noise and then one per reverse step.
    k_steps = 0 returns x_init unchanged.
    """
    if not 0 <= k_steps <= schedule.n_steps:
        raise DiffusionError(
            "k_steps must lie in [0, {}], got {}".format(schedule.n_steps, k_steps)
        )
    if k_steps == 0:
        return x_init.clone()
    if noise is None:
        noise = draw_chain_noise(x_init.shape, k_steps, generator, False, x_init.dtype)
    with torch.no_grad():
        anchor = model.prior(x_cond, h, adjacency, x_init.shape[1], cond_times).anchor
        x_start = q_sample_cond(x_init, anchor, k_steps, noise[0].to(x_init), schedule)
        return _conditional_chain(
            model,
            x_start,
            anchor,
            k_steps,
            x_cond,
            h,
            adjacency,
            schedule,
            noise[1:],
            cond_times,
            None,
        )
