"""Trajectory metrics: displacement errors, histogram distances, and surrogate-model scores.

Trajectory tensors are ... x T x N x D; leading axes index trajectories.
"""

import logging
import math
from typing import TYPE_CHECKING

import numpy as np
import torch
from torch import nn

from geotdm.egtn.model import condition_times, Egtn
from geotdm.entities.config import DEFAULT_EGTN_CONFIG, MarginalFeature, Reduction
from geotdm.exc import EvaluationError

if TYPE_CHECKING:
    from geotdm.entities.config import EgtnConfig
    from geotdm.entities.trajectory import TrajectoryBatch
    from torch import Tensor
    from typing import List, Optional, Sequence, Tuple, Union

logger = logging.getLogger(__name__)

# Width of the one-layer networks behind the surrogate scores.
SURROGATE_HIDDEN_DIM = 32
SURROGATE_LEARNING_RATE = 1e-3
SURROGATE_BATCH_SIZE = 64


def _check_shapes(x, y):
    # type: (Tensor, Tensor) -> None
    if x.shape != y.shape:
        msg = "trajectory shapes differ: {} and {}".format(tuple(x.shape), tuple(y.shape))
        raise EvaluationError(msg)
    if x.dim() < 3:
        raise EvaluationError("trajectories must be T x N x D, got {}".format(tuple(x.shape)))


def displacement_errors(x, y):
    # type: (Tensor, Tensor) -> Tuple[Tensor, Tensor]
    """Per-trajectory ADE and FDE, shaped like the leading axes of x."""
    _check_shapes(x, y)
    distances = torch.linalg.norm((x - y).to(torch.float64), dim=-1)
    return distances.mean(dim=(-2, -1)), distances[..., -1, :].mean(dim=-1)


def ade_fde(x, y):
    # type: (Tensor, Tensor) -> Tuple[float, float]
    """Average and final displacement error, averaged over any leading trajectory axes."""
    ade, fde = displacement_errors(x, y)
    return float(ade.mean()), float(fde.mean())


def min_over_k(samples, y, reduction=Reduction.MIN):
    # type: (Union[Sequence[Tensor], Tensor], Tensor, Reduction) -> Tuple[float, float]
    """Reduce ADE and FDE over K samples of each trajectory, then average over trajectories.

    samples is a sequence of K tensors shaped like y, or one K x ... tensor.
    """
    if len(samples) == 0:
        raise EvaluationError("min_over_k needs at least one sample")
    stacked = samples if isinstance(samples, torch.Tensor) else torch.stack(list(samples))
    ade, fde = displacement_errors(stacked, y.unsqueeze(0).expand_as(stacked))
    if reduction == Reduction.MIN:
        ade, fde = ade.min(dim=0).values, fde.min(dim=0).values
    else:
        ade, fde = ade.mean(dim=0), fde.mean(dim=0)
    return float(ade.mean()), float(fde.mean())


def _edge_lengths(coords, adjacency):
    # type: (np.ndarray, Optional[np.ndarray]) -> np.ndarray
    """Lengths over edges i < j, B x T x E."""
    n = coords.shape[-2]
    if adjacency is None:
        adjacency = np.ones((n, n))
    rows, cols = np.nonzero(np.triu(adjacency, k=1))
    return np.linalg.norm(coords[..., rows, :] - coords[..., cols, :], axis=-1)


def _histogram_distance(a, b, bins):
    # type: (np.ndarray, np.ndarray, int) -> float
    lo = min(a.min(), b.min())
    hi = max(a.max(), b.max())
    if hi <= lo:
        lo, hi = lo - 0.5, hi + 0.5
    mass_a, _ = np.histogram(a, bins=bins, range=(lo, hi))
    mass_b, _ = np.histogram(b, bins=bins, range=(lo, hi))
    return float(np.mean(np.abs(mass_a / a.size - mass_b / b.size)))


def marginal_score(generated, reference, bins=50, feature=MarginalFeature.COORDS, adjacency=None):
    # type: (Tensor, Tensor, int, MarginalFeature, Optional[Tensor]) -> float
    """Mean absolute difference of per-frame marginal histograms.

    For every frame the chosen feature is pooled over all trajectories and nodes (and, for
    coordinates, taken per dimension), both sets are binned on the union of their ranges, and the
    absolute difference of bin masses is averaged over bins, dimensions, and frames.  adjacency
    (N x N) selects the edges for pairwise_edge_lengths; the complete graph is used if omitted.
    """
    if bins < 2:
        raise EvaluationError("bins must be at least 2")
    if generated.shape[0] == 0 or reference.shape[0] == 0:
        raise EvaluationError("marginal_score needs nonempty sets")
    if generated.shape[1:] != reference.shape[1:]:
        raise EvaluationError("generated and reference trajectories differ in shape")
    gen = generated.detach().to(torch.float64).cpu().numpy()
    ref = reference.detach().to(torch.float64).cpu().numpy()
    if feature == MarginalFeature.PAIRWISE_EDGE_LENGTHS:
        edges = adjacency.detach().cpu().numpy() if adjacency is not None else None
        gen = _edge_lengths(gen, edges)[..., None]
        ref = _edge_lengths(ref, edges)[..., None]
        if gen.shape[2] == 0:
            raise EvaluationError("the graph has no edges to measure")
    distances = []  # type: List[float]
    for t in range(gen.shape[1]):
        for d in range(gen.shape[-1]):
            distances.append(_histogram_distance(gen[:, t, ..., d], ref[:, t, ..., d], bins))
    return float(np.mean(distances))


def _surrogate_config(feature_dim):
    # type: (int) -> EgtnConfig
    return DEFAULT_EGTN_CONFIG._replace(
        n_layers=1,
        hidden_dim=SURROGATE_HIDDEN_DIM,
        n_heads=1,
        feature_dim=feature_dim,
        use_cross_attention=True,
    )


class TrajectoryClassifier(nn.Module):
    """One-layer network with a mean-pooled invariant head producing one logit per trajectory."""

    def __init__(self, feature_dim):
        # type: (int) -> None
        super(TrajectoryClassifier, self).__init__()
        self.network = Egtn(_surrogate_config(feature_dim))
        self.head = nn.Linear(SURROGATE_HIDDEN_DIM, 1)

    def forward(self, x, h, adjacency):
        # type: (Tensor, Tensor, Tensor) -> Tensor
        _, features = self.network(x, h, adjacency)
        return self.head(features.mean(dim=(1, 2))).squeeze(-1)


class TrajectoryPredictor(nn.Module):
    """One-layer network predicting the second half of a trajectory from the first half."""

    def __init__(self, feature_dim):
        # type: (int) -> None
        super(TrajectoryPredictor, self).__init__()
        self.network = Egtn(_surrogate_config(feature_dim))

    def forward(self, first_half, h, adjacency, n_frames):
        # type: (Tensor, Tensor, Tensor, int) -> Tensor
        last = first_half[:, -1:]
        start = last.expand((last.shape[0], n_frames) + last.shape[2:])
        times = condition_times(first_half.shape[1], first_half.device)
        out, _ = self.network(start, h, adjacency, None, first_half, times)
        return out


def _as_dtype(batch, dtype):
    # type: (TrajectoryBatch, torch.dtype) -> TrajectoryBatch
    return batch._replace(
        coords=batch.coords.to(dtype),
        node_features=batch.node_features.to(dtype),
        adjacency=batch.adjacency.to(dtype),
    )


def _batches(n, generator, budget):
    # type: (int, torch.Generator, int) -> List[Tensor]
    """Index batches for budget optimizer steps, reshuffling every pass over the data."""
    batches = []  # type: List[Tensor]
    while len(batches) < budget:
        order = torch.randperm(n, generator=generator)
        for start in range(0, n, SURROGATE_BATCH_SIZE):
            batches.append(order[start : start + SURROGATE_BATCH_SIZE])
    return batches[:budget]


def classification_score(generated, reference, budget, generator):
    # type: (TrajectoryBatch, TrajectoryBatch, int, torch.Generator) -> float
    """Test cross-entropy of a classifier telling generated from reference trajectories.

    Both sets are truncated to the same size, mixed, and split 80/20.  Higher scores mean the sets
    are harder to tell apart; a chance-level classifier scores ln 2.
    """
    count = min(generated.coords.shape[0], reference.coords.shape[0])
    reference = _as_dtype(reference, generated.coords.dtype)
    coords = torch.cat([generated.coords[:count], reference.coords[:count]])
    features = torch.cat([generated.node_features[:count], reference.node_features[:count]])
    adjacency = torch.cat([generated.adjacency[:count], reference.adjacency[:count]])
    labels = torch.cat([torch.zeros(count), torch.ones(count)]).to(coords.dtype)
    order = torch.randperm(2 * count, generator=generator)
    n_train = int(round(0.8 * 2 * count))
    train, test = order[:n_train], order[n_train:]
    for split in (train, test):
        if split.numel() == 0 or labels[split].min() == labels[split].max():
            raise EvaluationError("classification split does not contain both classes")

    classifier = TrajectoryClassifier(features.shape[-1]).to(coords.dtype)
    optimizer = torch.optim.Adam(classifier.parameters(), lr=SURROGATE_LEARNING_RATE)
    loss_fn = nn.BCEWithLogitsLoss()
    for batch in _batches(train.numel(), generator, budget):
        index = train[batch]
        optimizer.zero_grad()
        logits = classifier(coords[index], features[index], adjacency[index])
        loss = loss_fn(logits, labels[index])
        loss.backward()
        optimizer.step()
    with torch.no_grad():
        logits = classifier(coords[test], features[test], adjacency[test])
        score = float(loss_fn(logits, labels[test]))
    logger.debug("classification score %.4f (ln 2 = %.4f)", score, math.log(2.0))
    return score


def prediction_score(generated, reference, budget, generator):
    # type: (TrajectoryBatch, TrajectoryBatch, int, torch.Generator) -> float
    """Reference-set MSE of a first-half to second-half predictor trained on generated data."""
    n_frames = generated.coords.shape[1]
    if n_frames < 2:
        raise EvaluationError("prediction score needs at least two frames")
    split = n_frames // 2
    predictor = TrajectoryPredictor(generated.node_features.shape[-1]).to(generated.coords.dtype)
    optimizer = torch.optim.Adam(predictor.parameters(), lr=SURROGATE_LEARNING_RATE)
    rest = n_frames - split
    for index in _batches(generated.coords.shape[0], generator, budget):
        coords = generated.coords[index]
        optimizer.zero_grad()
        predicted = predictor(
            coords[:, :split], generated.node_features[index], generated.adjacency[index], rest
        )
        loss = torch.mean((predicted - coords[:, split:]) ** 2)
        loss.backward()
        optimizer.step()
    with torch.no_grad():
        reference = _as_dtype(reference, generated.coords.dtype)
        coords = reference.coords
        first_half = coords[:, :split]
        predicted = predictor(first_half, reference.node_features, reference.adjacency, rest)
        return float(torch.mean((predicted - coords[:, split:]) ** 2))


def surrogate_scores(generated, reference, budget, generator):
    # type: (TrajectoryBatch, TrajectoryBatch, int, torch.Generator) -> Tuple[float, float]
    if generated.coords.shape[1:] != reference.coords.shape[1:]:
        raise EvaluationError("generated and reference trajectories differ in shape")
    return (
        classification_score(generated, reference, budget, generator),
        prediction_score(generated, reference, budget, generator),
    )
