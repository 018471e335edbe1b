import logging
from typing import TYPE_CHECKING

import torch
from torch import nn

from geotdm.constants import TEMPORAL_CONV_RADIUS
from geotdm.diffusion.prior import build_equivariant_prior
from geotdm.egtn.embedding import sinusoidal_embedding
from geotdm.egtn.layers import Egcl, TemporalAttention, TemporalConvolution
from geotdm.entities.config import check_egtn_config, PriorKind, TemporalMixing
from geotdm.entities.trajectory import SubspaceNoise
from geotdm.exc import NumericalError
from geotdm.geom import project_zero_com

if TYPE_CHECKING:
    from geotdm.entities.config import EgtnConfig
    from geotdm.entities.diffusion import EquiPrior
    from torch import Tensor
    from typing import Dict, List, Optional, Tuple

logger = logging.getLogger(__name__)


def target_times(n_frames, device=None):
    # type: (int, Optional[torch.device]) -> Tensor
    return torch.arange(n_frames, device=device)


def condition_times(n_cond, device=None):
    # type: (int, Optional[torch.device]) -> Tensor
    """Condition frames immediately precede target frame 0."""
    return torch.arange(n_cond, device=device) - n_cond


class EgtnLayer(nn.Module):
    def __init__(self, config, cross_attention):
        # type: (EgtnConfig, bool) -> None
        super(EgtnLayer, self).__init__()
        self.cross_attention = cross_attention
        edge_dim = config.feature_dim if config.edge_features else 0
        self.egcl = Egcl(config.hidden_dim, edge_dim, config.equivariant)
        if config.temporal_mixing == TemporalMixing.CONV:
            self.temporal = TemporalConvolution(
                config.hidden_dim, TEMPORAL_CONV_RADIUS
            )  # type: nn.Module
        else:
            self.temporal = TemporalAttention(
                config.hidden_dim, config.time_emb_dim, config.n_heads, config.temporal_encoding
            )

    def forward(
        self,
        x,  # type: Tensor
        h,  # type: Tensor
        adjacency,  # type: Tensor
        times,  # type: Tensor
        x_cond=None,  # type: Optional[Tensor]
        h_cond=None,  # type: Optional[Tensor]
        cond_times=None,  # type: Optional[Tensor]
        edge_attr=None,  # type: Optional[Tensor]
    ):
        # type: (...) -> Tuple[Tensor, Tensor, Optional[Tensor]]
        x, h = self.egcl(x, h, adjacency, edge_attr)
        if self.cross_attention and x_cond is not None:
            # Condition coordinates stay fixed; only their features are refined.
            _, h_cond = self.egcl(x_cond, h_cond, adjacency, edge_attr)
            x, h = self.temporal(x, h, times, x_cond, h_cond, cond_times)
        else:
            x, h = self.temporal(x, h, times)
        return x, h, h_cond


class Egtn(nn.Module):
    """Equivariant geometric trajectory network.

    Alternates an EGCL over every frame with temporal attention across frames.  Node features,
    concatenated with the sinusoidal embedding of the diffusion step when one is given, are
    embedded and broadcast to every frame.  With cross_attention enabled, the attention also reads
    the condition frames passed to forward.

    With edge_features, the products h_i * h_j of the raw node features (charge products for
    charged particles) are passed to every EGCL as edge attributes.  temporal_mixing,
    temporal_encoding, and equivariant select the ablated variants of the layers.
    """

    def __init__(self, config, cross_attention=None):
        # type: (EgtnConfig, Optional[bool]) -> None
        super(Egtn, self).__init__()
        check_egtn_config(config)
        if cross_attention is None:
            cross_attention = config.use_cross_attention
        self.config = config
        self.cross_attention = cross_attention
        self.embed = nn.Linear(config.feature_dim + config.time_emb_dim, config.hidden_dim)
        self.layers = nn.ModuleList(
            [EgtnLayer(config, cross_attention) for _ in range(config.n_layers)]
        )

    def embed_features(self, h, step):
        # type: (Tensor, Optional[Tensor]) -> Tensor
        """Embed B x N x D_h node features for diffusion step step (B,), or for no step."""
        shape = h.shape[:-1] + (self.config.time_emb_dim,)
        if step is None:
            step_features = torch.zeros(shape, dtype=h.dtype, device=h.device)
        else:
            step_features = sinusoidal_embedding(step.to(h.device), self.config.time_emb_dim)
            step_features = step_features.to(h.dtype).unsqueeze(-2).expand(shape)
        return self.embed(torch.cat([h, step_features], dim=-1))

    def forward(
        self,
        x,  # type: Tensor
        h,  # type: Tensor
        adjacency,  # type: Tensor
        step=None,  # type: Optional[Tensor]
        x_cond=None,  # type: Optional[Tensor]
        cond_times=None,  # type: Optional[Tensor]
        times=None,  # type: Optional[Tensor]
    ):
        # type: (...) -> Tuple[Tensor, Tensor]
        """Map B x T x N x D coordinates to coordinates and B x T x N x H features."""
        if times is None:
            times = target_times(x.shape[1], x.device)
        embedded = self.embed_features(h, step).unsqueeze(1)
        edge_attr = None
        if self.config.edge_features:
            edge_attr = h.unsqueeze(-2) * h.unsqueeze(-3)
        h_frames = embedded.expand(x.shape[:3] + embedded.shape[-1:])
        h_cond = None
        if x_cond is not None and x_cond.shape[1] > 0 and self.cross_attention:
            if cond_times is None:
                cond_times = condition_times(x_cond.shape[1], x.device)
            h_cond = embedded.expand(x_cond.shape[:3] + embedded.shape[-1:])
        else:
            x_cond = None
        for layer in self.layers:
            x, h_frames, h_cond = layer(
                x, h_frames, adjacency, times, x_cond, h_cond, cond_times, edge_attr
            )
        if not bool(torch.isfinite(x).all()):
            raise NumericalError("network produced non-finite coordinates")
        return x, h_frames


class EgtnModel(nn.Module):
    """Denoiser plus the optional learnable prior subnetwork.

    denoiser holds the parameters theta.  For the learnable prior, prior_net and prior_head hold
    eta and gamma holds one weight per target frame.  gamma starts at zero, so an untrained prior
    anchors every target frame at the processed last condition frame.
    """

    def __init__(self, config, n_frames):
        # type: (EgtnConfig, int) -> None
        super(EgtnModel, self).__init__()
        self.config = config
        self.n_frames = n_frames
        self.denoiser = Egtn(config)
        self.prior_net = None  # type: Optional[Egtn]
        self.prior_head = None  # type: Optional[nn.Linear]
        self.gamma = None  # type: Optional[nn.Parameter]
        if config.prior == PriorKind.LEARNABLE:
            prior_config = config._replace(n_layers=config.prior_layers)
            self.prior_net = Egtn(prior_config, cross_attention=False)
            self.prior_head = nn.Linear(config.hidden_dim, 1)
            self.gamma = nn.Parameter(torch.zeros(n_frames))

    def process_condition(self, x_cond, h, adjacency, cond_times=None):
        # type: (Tensor, Tensor, Tensor, Optional[Tensor]) -> Tuple[Tensor, Tensor]
        """Run the prior subnetwork over the condition frames.

        Returns processed coordinates B x T_c x N x D and one scalar score per condition frame and
        node, B x T_c x N.
        """
        assert self.prior_net is not None and self.prior_head is not None
        if cond_times is None:
            cond_times = condition_times(x_cond.shape[1], x_cond.device)
        x_hat, h_hat = self.prior_net(x_cond, h, adjacency, times=cond_times)
        return x_hat, self.prior_head(h_hat).squeeze(-1)

    def prior(self, x_cond, h, adjacency, n_frames=None, cond_times=None):
        # type: (Tensor, Tensor, Tensor, Optional[int], Optional[Tensor]) -> EquiPrior
        if n_frames is None:
            n_frames = self.n_frames
        return build_equivariant_prior(self, x_cond, h, adjacency, n_frames, cond_times)


def eps_uncond(model, x, h, adjacency, step):
    # type: (EgtnModel, Tensor, Tensor, Tensor, Tensor) -> SubspaceNoise
    """Predicted noise of the unconditional process, projected to the zero-CoM subspace."""
    out, _ = model.denoiser(x, h, adjacency, step)
    return SubspaceNoise(project_zero_com(out - x))


def eps_cond(model, x, x_cond, h, adjacency, step, cond_times=None):
    # type: (EgtnModel, Tensor, Tensor, Tensor, Tensor, Tensor, Optional[Tensor]) -> Tensor
    """Predicted noise of the conditional process.

    Subtracting the input makes the prediction invariant under a joint translation of x and the
    condition while keeping it rotation-equivariant.
    """
    out, _ = model.denoiser(x, h, adjacency, step, x_cond, cond_times)
    return out - x


def parameter_groups(model):
    # type: (EgtnModel) -> Dict[str, List[nn.Parameter]]
    """Split parameters into denoiser (theta), prior network (eta), and prior weights (gamma)."""
    eta = []  # type: List[nn.Parameter]
    if model.prior_net is not None and model.prior_head is not None:
        eta = list(model.prior_net.parameters()) + list(model.prior_head.parameters())
    return {
        "theta": list(model.denoiser.parameters()),
        "eta": eta,
        "gamma": [model.gamma] if model.gamma is not None else [],
    }
