import torch

from geotdm.constants import SINUSOIDAL_BASE
from geotdm.exc import GeometryError


def sinusoidal_embedding(k, dim, base=SINUSOIDAL_BASE):
    # type: (torch.Tensor, int, float) -> torch.Tensor
    """Encode integer offsets or diffusion steps as interleaved sin/cos features.

    Component 2i is sin(k * base^(-2i/dim)) and component 2i + 1 is the matching cosine.  The
    output has the shape of k with a trailing axis of size dim, in float64.
    """
    if dim < 2 or dim % 2:
        raise GeometryError("embedding dimension must be even and positive, got {}".format(dim))
    k = torch.as_tensor(k).to(torch.float64)
    exponents = torch.arange(dim // 2, dtype=torch.float64, device=k.device) * (2.0 / dim)
    frequencies = torch.pow(torch.tensor(base, dtype=torch.float64, device=k.device), -exponents)
    angles = k.unsqueeze(-1) * frequencies
    return torch.stack([torch.sin(angles), torch.cos(angles)], dim=-1).flatten(-2)
