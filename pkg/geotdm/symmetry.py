"""Numerical checks of the symmetries the model is built to respect.

Each check draws random inputs and random rigid motions g = (R, r) and compares the model evaluated
on transformed inputs with the transformed model output:

  - network: f(g x, g x_c) = g f(x, x_c) on coordinates, with hidden features unchanged;
  - node permutation: relabelling nodes relabels the output the same way;
  - noise predictions: eps(g x) = R eps(x), for both processes;
  - prior: the anchor built from g x_c is g applied to the anchor built from x_c;
  - sampling chains: replaying a chain with every noise draw rotated by R gives R (and, for the
    conditional chain, g) applied to the original sample.

Deviations are relative: max |a - b| / max(1, max |b|).  The zero prior is not equivariant, so
prior-dependent checks are skipped for it.
"""

import logging
from collections import OrderedDict
from typing import TYPE_CHECKING

import torch

from geotdm.diffusion.cond import sample_cond
from geotdm.diffusion.sampling import draw_chain_noise
from geotdm.diffusion.uncond import sample_uncond
from geotdm.egtn.model import eps_cond, eps_uncond
from geotdm.entities.config import PriorKind
from geotdm.entities.symmetry import SymmetryCheck
from geotdm.exc import GeometryError
from geotdm.geom import check_rotation, project_zero_com, random_rigid_motion, rotate_translate

if TYPE_CHECKING:
    from geotdm.egtn.model import EgtnModel
    from geotdm.entities.diffusion import NoiseSchedule
    from geotdm.entities.trajectory import RigidMotion
    from torch import Tensor
    from typing import Dict, List, Optional

logger = logging.getLogger(__name__)

# Largest relative deviation accepted at each precision.
TOLERANCES = {torch.float32: 1e-4, torch.float64: 1e-8}


def relative_deviation(a, b):
    # type: (Tensor, Tensor) -> float
    scale = max(float(b.abs().max()), 1.0) if b.numel() else 1.0
    return float((a - b).abs().max()) / scale if a.numel() else 0.0


def _act(g, x):
    # type: (RigidMotion, Tensor) -> Tensor
    return rotate_translate(x, g.rotation, g.translation)


def _rotate(g, x):
    # type: (RigidMotion, Tensor) -> Tensor
    return rotate_translate(x, g.rotation)


def _gaussian(shape, generator, dtype, device):
    # type: (tuple, torch.Generator, torch.dtype, torch.device) -> Tensor
    return torch.randn(shape, generator=generator, dtype=torch.float64).to(dtype).to(device)


def check_model_equivariance(
    model,  # type: EgtnModel
    schedule,  # type: NoiseSchedule
    generator,  # type: torch.Generator
    n_nodes=5,  # type: int
    dim=3,  # type: int
    cond_frames=2,  # type: int
    trials=10,  # type: int
    chain_schedule=None,  # type: Optional[NoiseSchedule]
):
    # type: (...) -> List[SymmetryCheck]
    """Run every symmetry check against model at the precision of its parameters.

    Network evaluations use steps drawn from schedule; sampling chains run on chain_schedule,
    which defaults to schedule and is usually a short schedule so the check stays cheap.
    """
    if dim not in (2, 3):
        raise GeometryError("symmetry checks need D in {{2, 3}}, got {}".format(dim))
    parameter = next(model.parameters())
    dtype, device = parameter.dtype, parameter.device
    tolerance = TOLERANCES.get(dtype, TOLERANCES[torch.float32])
    if chain_schedule is None:
        chain_schedule = schedule
    n_frames = model.n_frames
    equivariant_prior = model.config.prior != PriorKind.ZERO
    deviations = OrderedDict()  # type: Dict[str, List[float]]

    def record(name, a, b):
        # type: (str, Tensor, Tensor) -> None
        deviations.setdefault(name, []).append(relative_deviation(a, b))

    was_training = model.training
    model.eval()
    with torch.no_grad():
        for _ in range(trials):
            g = random_rigid_motion(dim, generator, dtype=dtype)
            check_rotation(g.rotation)
            g = g._replace(rotation=g.rotation.to(device), translation=g.translation.to(device))
            x = _gaussian((1, n_frames, n_nodes, dim), generator, dtype, device)
            x_cond = _gaussian((1, cond_frames, n_nodes, dim), generator, dtype, device)
            h = _gaussian((1, n_nodes, model.config.feature_dim), generator, dtype, device)
            adjacency = (1.0 - torch.eye(n_nodes, dtype=dtype, device=device)).unsqueeze(0)
            step = torch.randint(1, schedule.n_steps + 1, (1,), generator=generator).to(device)

            out, features = model.denoiser(x, h, adjacency, step, x_cond)
            out_g, features_g = model.denoiser(_act(g, x), h, adjacency, step, _act(g, x_cond))
            record("network coordinates", out_g, _act(g, out))
            record("network features", features_g, features)

            permutation = torch.randperm(n_nodes, generator=generator).to(device)
            out_p, _ = model.denoiser(
                x[:, :, permutation],
                h[:, permutation],
                adjacency[:, permutation][:, :, permutation],
                step,
                x_cond[:, :, permutation],
            )
            record("network node permutation", out_p, out[:, :, permutation])

            x_sub = project_zero_com(x)
            e = eps_uncond(model, x_sub, h, adjacency, step).values
            e_g = eps_uncond(model, _act(g, x_sub), h, adjacency, step).values
            record("unconditional noise prediction", e_g, _rotate(g, e))

            e = eps_cond(model, x, x_cond, h, adjacency, step)
            e_g = eps_cond(model, _act(g, x), _act(g, x_cond), h, adjacency, step)
            record("conditional noise prediction", e_g, _rotate(g, e))

            shape = (1, n_frames, n_nodes, dim)
            noise = draw_chain_noise(shape, chain_schedule.n_steps, generator, True, dtype)
            noise = noise.to(device)
            sample = sample_uncond(
                model, n_frames, h, adjacency, dim, chain_schedule, generator, noise=noise
            )
            sample_g = sample_uncond(
                model,
                n_frames,
                h,
                adjacency,
                dim,
                chain_schedule,
                generator,
                noise=_rotate(g, noise),
            )
            record("unconditional sampling chain", sample_g, _rotate(g, sample))

            if not equivariant_prior:
                continue
            anchor = model.prior(x_cond, h, adjacency, n_frames).anchor
            anchor_g = model.prior(_act(g, x_cond), h, adjacency, n_frames).anchor
            record("prior anchor", anchor_g, _act(g, anchor))

            noise = draw_chain_noise(shape, chain_schedule.n_steps, generator, False, dtype)
            noise = noise.to(device)
            sample = sample_cond(
                model, x_cond, h, adjacency, n_frames, chain_schedule, generator, noise=noise
            )
            sample_g = sample_cond(
                model,
                _act(g, x_cond),
                h,
                adjacency,
                n_frames,
                chain_schedule,
                generator,
                noise=_rotate(g, noise),
            )
            record("conditional sampling chain", sample_g, _act(g, sample))
    model.train(was_training)

    if not equivariant_prior:
        logger.info("prior %s is not equivariant; prior checks skipped", model.config.prior.value)
    checks = []
    for name, values in deviations.items():
        worst = max(values)
        checks.append(SymmetryCheck(name, worst, tolerance, len(values), worst <= tolerance))
        logger.debug("%s: max deviation %.3g over %d trials", name, worst, len(values))
    return checks
