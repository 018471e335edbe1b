"""Noise schedules and the closed-form Gaussian quantities of the forward process.

Steps are 1-based: step tau lives at index tau - 1 of every schedule table.  Helpers that take a
step accept either a Python int or a tensor of per-element steps and broadcast over the trailing
(T, N, D) axes.
"""

from typing import TYPE_CHECKING

import torch

from geotdm.entities.config import check_schedule_config, InvalidConfigException, ScheduleConfig
from geotdm.entities.diffusion import NoiseSchedule
from geotdm.exc import DiffusionError

if TYPE_CHECKING:
    from torch import Tensor
    from typing import Optional, Tuple, Union

    Step = Union[int, Tensor]


def make_schedule_from_betas(betas, loss_weights=None):
    # type: (Tensor, Optional[Tensor]) -> NoiseSchedule
    betas = torch.as_tensor(betas, dtype=torch.float64).reshape(-1)
    if betas.numel() < 1:
        raise DiffusionError("a schedule needs at least one step")
    if bool(((betas <= 0) | (betas >= 1)).any()):
        raise DiffusionError("every beta must lie in (0, 1)")
    alphas = 1.0 - betas
    alpha_bars = torch.cumprod(alphas, dim=0)
    if loss_weights is None:
        loss_weights = torch.ones_like(betas)
    else:
        loss_weights = torch.as_tensor(loss_weights, dtype=torch.float64).reshape(-1)
        if loss_weights.shape != betas.shape:
            raise DiffusionError("loss_weights must have one entry per step")
    return NoiseSchedule(
        n_steps=betas.numel(),
        betas=betas,
        alphas=alphas,
        alpha_bars=alpha_bars,
        variances=betas.clone(),
        loss_weights=loss_weights,
    )


def make_linear_schedule(n_steps, beta_start, beta_end):
    # type: (int, float, float) -> NoiseSchedule
    """Betas spaced linearly from beta_start at step 1 to beta_end at step n_steps."""
    try:
        check_schedule_config(ScheduleConfig(n_steps, beta_start, beta_end))
    except InvalidConfigException as e:
        raise DiffusionError(str(e))
    if n_steps == 1:
        betas = torch.tensor([beta_start], dtype=torch.float64)
    else:
        betas = torch.linspace(beta_start, beta_end, n_steps, dtype=torch.float64)
    return make_schedule_from_betas(betas)


def schedule_from_config(config):
    # type: (ScheduleConfig) -> NoiseSchedule
    return make_linear_schedule(config.n_steps, config.beta_start, config.beta_end)


def check_step(step, schedule, lowest=1):
    # type: (Step, NoiseSchedule, int) -> None
    steps = torch.as_tensor(step)
    if steps.numel() and (steps.min() < lowest or steps.max() > schedule.n_steps):
        msg = "diffusion step out of range [{}, {}]: {}".format(
            lowest, schedule.n_steps, steps.tolist()
        )
        raise DiffusionError(msg)


def gather(table, step, like):
    # type: (Tensor, Step, Tensor) -> Tensor
    """Look up table[step - 1], shaped to broadcast against a ... x T x N x D tensor like."""
    index = torch.as_tensor(step, dtype=torch.long, device=table.device) - 1
    values = table[index].to(dtype=like.dtype, device=like.device)
    return values.reshape(values.shape + (1, 1, 1))


def alpha_bar_before(schedule, step, like):
    # type: (NoiseSchedule, Step, Tensor) -> Tensor
    """alpha_bar at step - 1, with alpha_bar at step 0 equal to one."""
    padded = torch.cat([torch.ones(1, dtype=torch.float64), schedule.alpha_bars])
    return gather(padded, torch.as_tensor(step) + 1, like)


def posterior_mean_variance(x0, x_t, anchor, step, schedule):
    # type: (Tensor, Tensor, Tensor, Step, NoiseSchedule) -> Tuple[Tensor, Tensor]
    """Mean and per-coordinate variance of q(x_{tau-1} | x_tau, x_0) for a process about anchor.

    The unconditional process is the case anchor = 0.  At step 1 the posterior collapses onto x_0
    with zero variance.
    """
    check_step(step, schedule)
    beta = gather(schedule.betas, step, x_t)
    alpha = gather(schedule.alphas, step, x_t)
    alpha_bar = gather(schedule.alpha_bars, step, x_t)
    alpha_bar_prev = alpha_bar_before(schedule, step, x_t)
    x0_coefficient = torch.sqrt(alpha_bar_prev) * beta / (1.0 - alpha_bar)
    xt_coefficient = torch.sqrt(alpha) * (1.0 - alpha_bar_prev) / (1.0 - alpha_bar)
    mean = anchor + x0_coefficient * (x0 - anchor) + xt_coefficient * (x_t - anchor)
    variance = (1.0 - alpha_bar_prev) * beta / (1.0 - alpha_bar)
    return mean, variance


def reverse_mean(x_t, anchor, eps, step, schedule):
    # type: (Tensor, Tensor, Tensor, Step, NoiseSchedule) -> Tensor
    """mu = anchor + (x_tau - anchor - beta / sqrt(1 - alpha_bar) eps) / sqrt(alpha)."""
    beta = gather(schedule.betas, step, x_t)
    alpha = gather(schedule.alphas, step, x_t)
    alpha_bar = gather(schedule.alpha_bars, step, x_t)
    return anchor + (x_t - anchor - beta / torch.sqrt(1.0 - alpha_bar) * eps) / torch.sqrt(alpha)


def kl_term(x0, x_t, anchor, step, eps_pred, schedule):
    # type: (Tensor, Tensor, Tensor, Step, Tensor, NoiseSchedule) -> Tensor
    """KL(q(x_{tau-1} | x_tau, x_0) || p(x_{tau-1} | x_tau)) per trajectory, for tau >= 2.

    Both distributions are isotropic Gaussians, so the divergence sums over all T * N * D
    coordinates.
    """
    check_step(step, schedule, lowest=2)
    q_mean, q_variance = posterior_mean_variance(x0, x_t, anchor, step, schedule)
    p_mean = reverse_mean(x_t, anchor, eps_pred, step, schedule)
    p_variance = gather(schedule.variances, step, x_t)
    per_coordinate = 0.5 * (
        torch.log(p_variance / q_variance)
        + (q_variance + (q_mean - p_mean) ** 2) / p_variance
        - 1.0
    )
    return torch.sum(per_coordinate, dim=(-3, -2, -1))


def kl_weight(step, schedule):
    # type: (int, NoiseSchedule) -> float
    """Factor beta^2 / (2 sigma^2 alpha (1 - alpha_bar)) linking the KL to the noise error."""
    check_step(step, schedule)
    i = step - 1
    beta = float(schedule.betas[i])
    return beta ** 2 / (
        2.0
        * float(schedule.variances[i])
        * float(schedule.alphas[i])
        * (1.0 - float(schedule.alpha_bars[i]))
    )


def signal_and_noise_scales(step, schedule, like):
    # type: (Step, NoiseSchedule, Tensor) -> Tuple[Tensor, Tensor]
    check_step(step, schedule)
    alpha_bar = gather(schedule.alpha_bars, step, like)
    return torch.sqrt(alpha_bar), torch.sqrt(1.0 - alpha_bar)


def describe(schedule):
    # type: (NoiseSchedule) -> str
    return "{} steps, beta {:.3g} to {:.3g}, final alpha_bar {:.3g}".format(
        schedule.n_steps,
        float(schedule.betas[0]),
        float(schedule.betas[-1]),
        float(schedule.alpha_bars[-1]),
    )

