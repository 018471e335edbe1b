from typing import NamedTuple

from torch import Tensor

# Per-step tables of a diffusion process with n_steps steps.  Every tensor has length n_steps and
# is float64; entry tau - 1 belongs to step tau.  variances holds the reverse-process variances
# sigma_tau^2 and loss_weights the per-step weights of the noise-prediction loss.
NoiseSchedule = NamedTuple(
    "NoiseSchedule",
    [
        ("n_steps", int),
        ("betas", Tensor),
        ("alphas", Tensor),
        ("alpha_bars", Tensor),
        ("variances", Tensor),
        ("loss_weights", Tensor),
    ],
)

# Mean of the conditional diffusion prior.  anchor is B x T x N x D; weights is B x T x T_c x N and
# sums to one over the condition axis for the equivariant priors.  The zero prior has zero weights.
EquiPrior = NamedTuple("EquiPrior", [("anchor", Tensor), ("weights", Tensor)])
