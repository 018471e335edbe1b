from typing import TYPE_CHECKING

import torch

from geotdm.egtn.model import EgtnModel
from geotdm.entities.config import DEFAULT_EGTN_CONFIG, PriorKind

if TYPE_CHECKING:
    from torch import nn
    from typing import Tuple

# A network small enough to run hundreds of times per test.
TINY_CONFIG = DEFAULT_EGTN_CONFIG._replace(
    n_layers=2, hidden_dim=8, time_emb_dim=4, prior_layers=1
)


def randomize_parameters(module, seed, scale=0.1):
    # type: (nn.Module, int, float) -> None
    """Replace every parameter, including the zero-initialised gates, with small random values."""
    generator = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for parameter in module.parameters():
            values = torch.randn(parameter.shape, generator=generator, dtype=torch.float64)
            parameter.copy_(scale * values)


def random_model(n_frames, prior=PriorKind.LEARNABLE, seed=0):
    # type: (int, PriorKind, int) -> EgtnModel
    """A float64 model whose coordinate updates are not trivially zero."""
    model = EgtnModel(TINY_CONFIG._replace(prior=prior), n_frames).double()
    randomize_parameters(model, seed)
    return model


def random_batch(seed, batch, n_frames, n_cond, n_nodes, dim=3):
    # type: (int, int, int, int, int, int) -> Tuple[torch.Tensor, ...]
    """Float64 target frames, condition frames, node features, and a complete-graph adjacency."""
    generator = torch.Generator().manual_seed(seed)
    x = torch.randn(batch, n_frames, n_nodes, dim, generator=generator, dtype=torch.float64)
    x_cond = torch.randn(batch, n_cond, n_nodes, dim, generator=generator, dtype=torch.float64)
    h = torch.randn(batch, n_nodes, 1, generator=generator, dtype=torch.float64)
    adjacency = (1.0 - torch.eye(n_nodes, dtype=torch.float64)).expand(batch, n_nodes, n_nodes)
    return x, x_cond, h, adjacency
