"""Reference predictors the diffusion models are measured against."""

from typing import TYPE_CHECKING

import torch

from geotdm.exc import EvaluationError

if TYPE_CHECKING:
    from torch import Tensor


def constant_velocity_baseline(x_cond, n_frames):
    # type: (Tensor, int) -> Tensor
    """Extrapolate ... x T_c x N x D condition frames at the velocity of their last two frames.

    A single condition frame is held still.
    """
    if x_cond.shape[-3] < 1:
        raise EvaluationError("constant velocity needs at least one condition frame")
    last = x_cond[..., -1:, :, :]
    if x_cond.shape[-3] > 1:
        velocity = last - x_cond[..., -2:-1, :, :]
    else:
        velocity = torch.zeros_like(last)
    steps = torch.arange(1, n_frames + 1, dtype=x_cond.dtype, device=x_cond.device)
    return last + steps.reshape(-1, 1, 1) * velocity


def linear_interpolation_baseline(head, tail, n_mid):
    # type: (Tensor, Tensor, int) -> Tensor
    """Straight-line frames between the last head frame and the first tail frame, exclusive."""
    if head.shape[-3] < 1 or tail.shape[-3] < 1:
        raise EvaluationError("linear interpolation needs head and tail frames")
    start = head[..., -1:, :, :]
    end = tail[..., :1, :, :]
    fractions = torch.arange(1, n_mid + 1, dtype=head.dtype, device=head.device) / (n_mid + 1)
    return start + fractions.reshape(-1, 1, 1) * (end - start)


def gaussian_trajectory_baseline(reference, count, generator):
    # type: (Tensor, int, torch.Generator) -> Tensor
    """Independent Gaussian coordinates matching the reference's per-dimension mean and scale."""
    if reference.shape[0] == 0:
        raise EvaluationError("the reference set is empty")
    flat = reference.to(torch.float64).reshape(-1, reference.shape[-1])
    mean = flat.mean(dim=0)
    std = flat.std(dim=0) if flat.shape[0] > 1 else torch.ones_like(mean)
    shape = (count,) + tuple(reference.shape[1:])
    draws = torch.randn(shape, generator=generator, dtype=torch.float64)
    return (draws * std + mean).to(reference.dtype)
