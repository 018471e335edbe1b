"""Spatial and temporal layers of the trajectory network.

Coordinates are B x T x N x D and hidden features B x T x N x H.  In their default form the layers
update coordinates only through sums of scalar gates times coordinate differences, so they commute
with rotations and translations of the input coordinates while leaving the hidden features
invariant.  Egcl(equivariant=False) reads raw coordinates and gives that up.
"""

import math
from typing import TYPE_CHECKING

import torch
from torch import nn

from geotdm.constants import DISTANCE_EPSILON
from geotdm.egtn.embedding import sinusoidal_embedding
from geotdm.entities.config import TemporalEncoding
from geotdm.exc import GeometryError

if TYPE_CHECKING:
    from torch import Tensor
    from typing import Optional, Tuple


def mlp(in_dim, hidden_dim, out_dim, zero_last=False):
    # type: (int, int, int, bool) -> nn.Sequential
    """Two hidden layers with SiLU activations."""
    last = nn.Linear(hidden_dim, out_dim)
    if zero_last:
        nn.init.zeros_(last.weight)
        nn.init.zeros_(last.bias)
    return nn.Sequential(
        nn.Linear(in_dim, hidden_dim),
        nn.SiLU(),
        nn.Linear(hidden_dim, hidden_dim),
        nn.SiLU(),
        last,
    )


def _join_condition(
    x,  # type: Tensor
    h,  # type: Tensor
    times,  # type: Tensor
    x_cond,  # type: Optional[Tensor]
    h_cond,  # type: Optional[Tensor]
    cond_times,  # type: Optional[Tensor]
):
    # type: (...) -> Tuple[Tensor, Tensor, Tensor]
    """Keys for temporal mixing: the target frames, followed by the condition frames if any."""
    if x_cond is None or x_cond.shape[1] == 0:
        return x, h, times
    if x_cond.shape[-2:] != x.shape[-2:]:
        msg = "condition frames have shape {}, target frames {}".format(
            tuple(x_cond.shape[-2:]), tuple(x.shape[-2:])
        )
        raise GeometryError(msg)
    assert h_cond is not None and cond_times is not None
    return (
        torch.cat([x, x_cond], dim=1),
        torch.cat([h, h_cond], dim=1),
        torch.cat([times, cond_times]),
    )


class Egcl(nn.Module):
    """Equivariant graph convolution applied independently to every frame.

    m_ij = phi_m(h_i, h_j, |x_i - x_j|, e_ij) over edges (i, j),
    x_i' = x_i + sum_j phi_x(m_ij) (x_i - x_j), and h_i' = h_i + phi_h(h_i, sum_j m_ij).

    e_ij are edge_dim optional edge attributes.  With equivariant=False every coordinate axis is
    also embedded into h and receives its own update from h and the raw coordinate value.
    """

    def __init__(self, hidden_dim, edge_dim=0, equivariant=True):
        # type: (int, int, bool) -> None
        super(Egcl, self).__init__()
        self.edge_dim = edge_dim
        self.equivariant = equivariant
        self.phi_m = mlp(2 * hidden_dim + 1 + edge_dim, hidden_dim, hidden_dim)
        self.phi_x = mlp(hidden_dim, hidden_dim, 1, zero_last=True)
        self.phi_h = mlp(2 * hidden_dim, hidden_dim, hidden_dim)
        self.phi_r = None  # type: Optional[nn.Sequential]
        self.phi_a = None  # type: Optional[nn.Sequential]
        if not equivariant:
            self.phi_r = mlp(1, hidden_dim, hidden_dim)
            self.phi_a = mlp(hidden_dim + 1, hidden_dim, 1, zero_last=True)

    def forward(self, x, h, adjacency, edge_attr=None):
        # type: (Tensor, Tensor, Tensor, Optional[Tensor]) -> Tuple[Tensor, Tensor]
        """x is B x T x N x D, h is B x T x N x H, adjacency is B x N x N.

        edge_attr is B x N x N x edge_dim and is shared by every frame.
        """
        n = x.shape[-2]
        if self.phi_r is not None:
            h = h + torch.mean(self.phi_r(x.unsqueeze(-1)), dim=-2)
        mask = adjacency.to(x.dtype).unsqueeze(1).unsqueeze(-1)
        d = x.unsqueeze(-2) - x.unsqueeze(-3)
        distance = torch.sqrt(torch.sum(d * d, dim=-1, keepdim=True) + DISTANCE_EPSILON)
        h_i = h.unsqueeze(-2).expand(h.shape[:-1] + (n, h.shape[-1]))
        h_j = h.unsqueeze(-3).expand(h.shape[:-2] + (n, n, h.shape[-1]))
        inputs = [h_i, h_j, distance]
        if self.edge_dim:
            if edge_attr is None or edge_attr.shape[-1] != self.edge_dim:
                raise GeometryError("expected {} edge attributes".format(self.edge_dim))
            edge_attr = edge_attr.to(x.dtype).unsqueeze(1)
            inputs.append(edge_attr.expand(distance.shape[:-1] + (self.edge_dim,)))
        m = self.phi_m(torch.cat(inputs, dim=-1)) * mask
        x = x + torch.sum(self.phi_x(m) * mask * d, dim=-2)
        h = h + self.phi_h(torch.cat([h, torch.sum(m, dim=-2)], dim=-1))
        if self.phi_a is not None:
            per_axis = h.unsqueeze(-2).expand(x.shape + h.shape[-1:])
            x = x + self.phi_a(torch.cat([per_axis, x.unsqueeze(-1)], dim=-1)).squeeze(-1)
        return x, h


class TemporalAttention(nn.Module):
    """Per-node attention over frames, optionally extended with condition frames.

    Queries come from the target frames.  Keys and values come from the target frames and, when a
    condition is given, from the condition frames as well, with one softmax over the union.

    With the relative encoding, keys and values receive a learned projection of the sinusoidal
    encoding of the signed frame displacement t - s, so only relative times enter.  With the
    absolute encoding, queries receive the projected encoding of t and keys and values that of s,
    so shifting every frame index changes the output.
    """

    def __init__(self, hidden_dim, time_emb_dim, n_heads=1, encoding=TemporalEncoding.RELATIVE):
        # type: (int, int, int, TemporalEncoding) -> None
        super(TemporalAttention, self).__init__()
        if hidden_dim % n_heads:
            raise GeometryError("hidden_dim must be divisible by n_heads")
        self.hidden_dim = hidden_dim
        self.time_emb_dim = time_emb_dim
        self.n_heads = n_heads
        self.head_dim = hidden_dim // n_heads
        self.encoding = encoding
        self.phi_q = mlp(hidden_dim, hidden_dim, hidden_dim)
        self.phi_k = mlp(hidden_dim, hidden_dim, hidden_dim)
        self.phi_v = mlp(hidden_dim, hidden_dim, hidden_dim)
        self.psi = nn.Linear(time_emb_dim, hidden_dim)
        self.phi_x = mlp(self.head_dim, self.head_dim, 1, zero_last=True)

    def _encode(self, times, like):
        # type: (Tensor, Tensor) -> Tensor
        embedding = sinusoidal_embedding(times.to(torch.long), self.time_emb_dim)
        return self.psi(embedding.to(device=like.device, dtype=like.dtype))

    def attention_weights(self, h, times, h_keys, key_times):
        # type: (Tensor, Tensor, Tensor, Tensor) -> Tuple[Tensor, Tensor]
        """Return attention weights B x T x S x N x heads and values B x {1, T} x S x N x H."""
        q = self.phi_q(h)
        if self.encoding == TemporalEncoding.RELATIVE:
            psi = self._encode(times.unsqueeze(-1) - key_times.unsqueeze(0), h).unsqueeze(-2)
        else:
            q = q + self._encode(times, h).unsqueeze(-2)
            psi = self._encode(key_times, h).unsqueeze(0).unsqueeze(-2)
        q = q.unsqueeze(2)
        k = self.phi_k(h_keys).unsqueeze(1) + psi
        v = self.phi_v(h_keys).unsqueeze(1) + psi
        products = q * k
        products = products.reshape(products.shape[:-1] + (self.n_heads, self.head_dim))
        logits = torch.sum(products, dim=-1)
        weights = torch.softmax(logits / math.sqrt(self.head_dim), dim=2)
        return weights, v

    def forward(
        self,
        x,  # type: Tensor
        h,  # type: Tensor
        times,  # type: Tensor
        x_cond=None,  # type: Optional[Tensor]
        h_cond=None,  # type: Optional[Tensor]
        cond_times=None,  # type: Optional[Tensor]
    ):
        # type: (...) -> Tuple[Tensor, Tensor]
        x_keys, h_keys, key_times = _join_condition(x, h, times, x_cond, h_cond, cond_times)
        weights, v = self.attention_weights(h, times, h_keys, key_times)
        split = v.shape[:-1] + (self.n_heads, self.head_dim)
        v_heads = v.reshape(split)
        h = h + torch.sum(weights.unsqueeze(-1) * v_heads, dim=2).flatten(-2)
        gates = torch.mean(weights * self.phi_x(v_heads).squeeze(-1), dim=-1)
        displacement = x.unsqueeze(2) - x_keys.unsqueeze(1)
        x = x + torch.sum(gates.unsqueeze(-1) * displacement, dim=2)
        return x, h


class TemporalConvolution(nn.Module):
    """Per-node convolution over the frames at most radius steps away, condition frames included.

    Each displacement t - s in [-radius, radius] has its own learned kernel, so only relative
    times enter.  Frames further apart do not interact within one layer.
    """

    def __init__(self, hidden_dim, radius):
        # type: (int, int) -> None
        super(TemporalConvolution, self).__init__()
        if radius < 0:
            raise GeometryError("convolution radius must be non-negative, got {}".format(radius))
        self.radius = radius
        self.kernel = nn.Parameter(torch.ones(2 * radius + 1, hidden_dim))
        self.phi_v = mlp(hidden_dim, hidden_dim, hidden_dim)
        self.phi_x = mlp(hidden_dim, hidden_dim, 1, zero_last=True)

    def forward(
        self,
        x,  # type: Tensor
        h,  # type: Tensor
        times,  # type: Tensor
        x_cond=None,  # type: Optional[Tensor]
        h_cond=None,  # type: Optional[Tensor]
        cond_times=None,  # type: Optional[Tensor]
    ):
        # type: (...) -> Tuple[Tensor, Tensor]
        x_keys, h_keys, key_times = _join_condition(x, h, times, x_cond, h_cond, cond_times)
        offsets = (times.unsqueeze(-1) - key_times.unsqueeze(0)).to(torch.long)
        window = (offsets.abs() <= self.radius).to(h.dtype)
        index = offsets.clamp(-self.radius, self.radius) + self.radius
        kernel = self.kernel[index] * window.unsqueeze(-1)
        messages = kernel.unsqueeze(-2) * self.phi_v(h_keys).unsqueeze(1)
        counts = torch.clamp(window.sum(dim=1), min=1.0).view(-1, 1, 1)
        h = h + torch.sum(messages, dim=2) / counts
        gates = self.phi_x(messages).squeeze(-1) * window.unsqueeze(-1)
        displacement = x.unsqueeze(2) - x_keys.unsqueeze(1)
        x = x + torch.sum(gates.unsqueeze(-1) * displacement, dim=2) / counts
        return x, h
