"""Conditional diffusion priors.

The learnable prior anchors target frame t at a per-node mixture of processed condition frames,
x_r(t) = sum_s w(t, s) * x_hat(s), whose weights sum to one over s.  Because the weights are
invariant and sum to one, the anchor moves with any rigid motion applied to the condition.
"""

from typing import TYPE_CHECKING

import torch

from geotdm.entities.config import PriorKind
from geotdm.entities.diffusion import EquiPrior
from geotdm.exc import DiffusionError
from geotdm.geom import center_of_mass

if TYPE_CHECKING:
    from geotdm.egtn.model import EgtnModel
    from torch import Tensor
    from typing import Optional


def mix_prior(x_hat, scores, gamma):
    # type: (Tensor, Tensor, Tensor) -> EquiPrior
    """Combine processed condition frames into the prior anchor.

    x_hat is B x T_c x N x D, scores is B x T_c x N, and gamma has one entry per target frame.
    W(t, s) = gamma(t) * scores(s) for every condition frame but the last, whose weight is one
    minus the others, so the weights sum to one exactly.
    """
    n_cond = x_hat.shape[1]
    if n_cond < 1:
        raise DiffusionError("the prior needs at least one condition frame")
    gamma = gamma.to(x_hat.dtype)
    free = gamma.reshape(1, -1, 1, 1) * scores[:, : n_cond - 1].unsqueeze(1)
    last = 1.0 - torch.sum(free, dim=2, keepdim=True)
    weights = torch.cat([free, last], dim=2)
    anchor = torch.einsum("btsn,bsnd->btnd", weights, x_hat)
    return EquiPrior(anchor=anchor, weights=weights)


def _last_frame_weights(x_cond, n_frames):
    # type: (Tensor, int) -> Tensor
    b, n_cond, n = x_cond.shape[:3]
    weights = torch.zeros(b, n_frames, n_cond, n, dtype=x_cond.dtype, device=x_cond.device)
    weights[:, :, -1] = 1.0
    return weights


def last_frame_prior(x_cond, n_frames):
    # type: (Tensor, int) -> EquiPrior
    last = x_cond[:, -1:]
    anchor = last.expand((last.shape[0], n_frames) + last.shape[2:])
    return EquiPrior(anchor=anchor, weights=_last_frame_weights(x_cond, n_frames))


def com_prior(x_cond, n_frames):
    # type: (Tensor, int) -> EquiPrior
    """Anchor every node of every target frame at the CoM of the last condition frame."""
    com = center_of_mass(x_cond[:, -1:]).unsqueeze(-2)
    anchor = com.expand((com.shape[0], n_frames) + x_cond.shape[2:])
    return EquiPrior(anchor=anchor, weights=_last_frame_weights(x_cond, n_frames))


def zero_prior(x_cond, n_frames):
    # type: (Tensor, int) -> EquiPrior
    shape = (x_cond.shape[0], n_frames) + x_cond.shape[2:]
    anchor = torch.zeros(shape, dtype=x_cond.dtype, device=x_cond.device)
    weights = torch.zeros_like(_last_frame_weights(x_cond, n_frames))
    return EquiPrior(anchor=anchor, weights=weights)


def build_equivariant_prior(model, x_cond, h, adjacency, n_frames, cond_times=None):
    # type: (EgtnModel, Tensor, Tensor, Tensor, int, Optional[Tensor]) -> EquiPrior
    """Build the prior for B x T_c x N x D condition frames according to the model's prior kind."""
    if x_cond.shape[1] < 1:
        raise DiffusionError("the prior needs at least one condition frame")
    kind = model.config.prior
    if kind == PriorKind.LAST_FRAME:
        return last_frame_prior(x_cond, n_frames)
    elif kind == PriorKind.COM:
        return com_prior(x_cond, n_frames)
    elif kind == PriorKind.ZERO:
        return zero_prior(x_cond, n_frames)

    assert model.gamma is not None
    if model.gamma.shape[0] != n_frames:
        msg = "prior was built for {} target frames, asked for {}".format(
            model.gamma.shape[0], n_frames
        )
        raise DiffusionError(msg)
    x_hat, scores = model.process_condition(x_cond, h, adjacency, cond_times)
    return mix_prior(x_hat, scores, model.gamma)
