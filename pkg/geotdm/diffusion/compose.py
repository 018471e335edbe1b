import logging
from typing import TYPE_CHECKING

import torch

from geotdm.diffusion.cond import sample_cond
from geotdm.diffusion.uncond import sample_uncond
from geotdm.exc import DiffusionError

if TYPE_CHECKING:
    from geotdm.egtn.model import EgtnModel
    from geotdm.entities.diffusion import NoiseSchedule
    from torch import Tensor
    from typing import Optional

logger = logging.getLogger(__name__)


def compose_long(
    uncond_model,  # type: Optional[EgtnModel]
    cond_model,  # type: EgtnModel
    n_segments,  # type: int
    segment_frames,  # type: int
    h,  # type: Tensor
    adjacency,  # type: Tensor
    dim,  # type: int
    schedule,  # type: NoiseSchedule
    generator,  # type: torch.Generator
    first_segment=None,  # type: Optional[Tensor]
    cond_frames=None,  # type: Optional[int]
):
    # type: (...) -> Tensor
    """Chain segment models into a trajectory of n_segments * segment_frames frames.

    The first segment comes from the unconditional model unless first_segment is given.  Every
    later segment is sampled from the conditional model given the last cond_frames frames
    generated so far (all of the previous segment by default).
    """
    if n_segments < 1:
        raise DiffusionError("n_segments must be at least 1")
    if cond_frames is None:
        cond_frames = segment_frames
    if first_segment is None:
        if uncond_model is None:
            raise DiffusionError("an unconditional model or a first segment is required")
        first_segment = sample_uncond(
            uncond_model, segment_frames, h, adjacency, dim, schedule, generator
        )
    elif first_segment.shape[1] != segment_frames:
        raise DiffusionError("first segment must have {} frames".format(segment_frames))

    segments = [first_segment]
    for index in range(1, n_segments):
        generated = torch.cat(segments, dim=1)
        x_cond = generated[:, -cond_frames:]
        segments.append(
            sample_cond(cond_model, x_cond, h, adjacency, segment_frames, schedule, generator)
        )
        logger.debug("sampled segment %d of %d", index + 1, n_segments)
    return torch.cat(segments, dim=1)
