"""Reverse-chain machinery shared by the unconditional and conditional samplers."""

from typing import TYPE_CHECKING

import torch

from geotdm.diffusion.schedule import check_step, gather, reverse_mean
from geotdm.exc import DiffusionError
from geotdm.geom import project_zero_com

if TYPE_CHECKING:
    from geotdm.entities.diffusion import NoiseSchedule
    from torch import Tensor
    from typing import Callable, Optional, Sequence

    EpsFunction = Callable[[Tensor, Tensor], Tensor]
    StepCallback = Callable[[int, Tensor], None]


def draw_chain_noise(shape, n_steps, generator, subspace=False, dtype=torch.float32):
    # type: (Sequence[int], int, torch.Generator, bool, torch.dtype) -> Tensor
    """Draw every Gaussian a chain of n_steps reverse steps consumes.

    Entry 0 is the initial draw and entry k is the noise added by the k-th reverse step, which
    runs at diffusion step n_steps - k + 1.  The final step adds no noise, so its entry is zero.
    With subspace set, every draw is projected onto the zero-CoM subspace.  Rotating a realisation
    and replaying it lets samplers be checked for exact equivariance.
    """
    shape = (n_steps + 1,) + tuple(shape)
    noise = torch.randn(shape, generator=generator, dtype=torch.float64).to(dtype)
    if subspace:
        noise = project_zero_com(noise)
    if n_steps > 0:
        noise[-1] = 0.0
    return noise


def reverse_chain(
    eps_fn,  # type: EpsFunction
    x_start,  # type: Tensor
    anchor,  # type: Tensor
    first_step,  # type: int
    schedule,  # type: NoiseSchedule
    noise,  # type: Tensor
    subspace=False,  # type: bool
    on_step=None,  # type: Optional[StepCallback]
):
    # type: (...) -> Tensor
    """Denoise from x_start at first_step down to step 0.

    noise[k - 1] is the noise added after the k-th step taken; eps_fn maps (x_tau, steps) to the
    predicted noise, with steps a B-long tensor.  With subspace set, every iterate is projected
    back onto the zero-CoM subspace.
    """
    if first_step == 0:
        return x_start
    check_step(first_step, schedule)
    if noise.shape[0] < first_step:
        raise DiffusionError("need {} noise draws, got {}".format(first_step, noise.shape[0]))
    x = x_start
    batch = x.shape[0]
    for k, tau in enumerate(range(first_step, 0, -1)):
        steps = torch.full((batch,), tau, dtype=torch.long, device=x.device)
        eps = eps_fn(x, steps)
        x = reverse_mean(x, anchor, eps, tau, schedule)
        if tau > 1:
            sigma = torch.sqrt(gather(schedule.variances, tau, x))
            x = x + sigma * noise[k].to(x)
        if subspace:
            x = project_zero_com(x)
        if on_step is not None:
            on_step(tau, x)
    return x
