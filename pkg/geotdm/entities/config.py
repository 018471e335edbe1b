from enum import Enum
from typing import NamedTuple


class PriorKind(Enum):
    """Mean of the conditional diffusion prior.

    LEARNABLE is the optimizable equivariant prior; the others are the fixed priors it subsumes,
    kept for ablations.  ZERO is the plain N(0, I) prior and is not equivariant.
    """

    LEARNABLE = "learnable"
    COM = "com"
    LAST_FRAME = "last_frame"
    ZERO = "zero"


class TrainMode(Enum):
    UNCOND = "uncond"
    COND = "cond"


class Task(Enum):
    FORECAST = "forecast"
    INTERPOLATE = "interpolate"


class Reduction(Enum):
    MIN = "min"
    MEAN = "mean"


class MarginalFeature(Enum):
    COORDS = "coords"
    PAIRWISE_EDGE_LENGTHS = "pairwise_edge_lengths"


class TemporalMixing(Enum):
    """How frames exchange information: attention over every frame, or a convolution over
    frames at most TEMPORAL_CONV_RADIUS apart.
    """

    ATTENTION = "attention"
    CONV = "conv"


class TemporalEncoding(Enum):
    """Whether attention sees frame displacements t - s or the frame indices themselves."""

    RELATIVE = "relative"
    ABSOLUTE = "absolute"


EgtnConfig = NamedTuple(
    "EgtnConfig",
    [
        ("n_layers", int),
        ("hidden_dim", int),
        ("time_emb_dim", int),
        ("n_heads", int),
        ("use_cross_attention", bool),
        ("feature_dim", int),
        ("prior", PriorKind),
        ("prior_layers", int),
        ("temporal_mixing", TemporalMixing),
        ("temporal_encoding", TemporalEncoding),
        ("equivariant", bool),
        ("edge_features", bool),
    ],
)

DEFAULT_EGTN_CONFIG = EgtnConfig(
    n_layers=6,
    hidden_dim=128,
    time_emb_dim=32,
    n_heads=1,
    use_cross_attention=True,
    feature_dim=1,
    prior=PriorKind.LEARNABLE,
    prior_layers=2,
    temporal_mixing=TemporalMixing.ATTENTION,
    temporal_encoding=TemporalEncoding.RELATIVE,
    equivariant=True,
    edge_features=True,
)

ScheduleConfig = NamedTuple(
    "ScheduleConfig", [("n_steps", int), ("beta_start", float), ("beta_end", float)]
)

DEFAULT_SCHEDULE_CONFIG = ScheduleConfig(n_steps=1000, beta_start=1e-4, beta_end=2e-2)

TrainConfig = NamedTuple(
    "TrainConfig",
    [
        ("learning_rate", float),
        ("batch_size", int),
        ("max_epochs", int),
        ("early_stop_patience", int),
        ("validation_interval", int),
        ("adam_beta1", float),
        ("adam_beta2", float),
        ("adam_eps", float),
        ("seed", int),
        ("mode", TrainMode),
        ("task", Task),
        ("grad_clip_norm", float),
        ("ema_decay", float),
        ("max_steps", int),
    ],
)

DEFAULT_TRAIN_CONFIG = TrainConfig(
    learning_rate=1e-4,
    batch_size=128,
    max_epochs=500,
    early_stop_patience=5,
    validation_interval=20,
    adam_beta1=0.9,
    adam_beta2=0.999,
    adam_eps=1e-8,
    seed=0,
    mode=TrainMode.COND,
    task=Task.FORECAST,
    grad_clip_norm=1.0,
    ema_decay=0.0,
    max_steps=0,
)

MetricConfig = NamedTuple(
    "MetricConfig",
    [
        ("bins", int),
        ("k", int),
        ("reduction", Reduction),
        ("feature", MarginalFeature),
        ("surrogate_budget", int),
    ],
)

DEFAULT_METRIC_CONFIG = MetricConfig(
    bins=50,
    k=5,
    reduction=Reduction.MEAN,
    feature=MarginalFeature.COORDS,
    surrogate_budget=500,
)


class InvalidConfigException(Exception):
    """A model, schedule, training, or metric configuration violates its invariants."""

    pass


def check_egtn_config(config):
    # type: (EgtnConfig) -> None
    counts = {
        "hidden_dim": config.hidden_dim,
        "time_emb_dim": config.time_emb_dim,
        "n_heads": config.n_heads,
        "feature_dim": config.feature_dim,
        "prior_layers": config.prior_layers,
    }
    for name, value in sorted(counts.items()):
        if value < 1:
            raise InvalidConfigException("{} must be at least 1, got {}".format(name, value))
    if config.n_layers < 0:
        raise InvalidConfigException("n_layers must be non-negative")
    if config.time_emb_dim % 2:
        raise InvalidConfigException("time_emb_dim must be even")
    if config.hidden_dim % config.n_heads:
        raise InvalidConfigException("hidden_dim must be divisible by n_heads")
    if (
        config.temporal_mixing == TemporalMixing.CONV
        and config.temporal_encoding == TemporalEncoding.ABSOLUTE
    ):
        raise InvalidConfigException("absolute temporal encoding requires attention mixing")


def check_schedule_config(config):
    # type: (ScheduleConfig) -> None
    if config.n_steps < 1:
        raise InvalidConfigException("n_steps must be at least 1")
    for beta in (config.beta_start, config.beta_end):
        if not 0.0 < beta < 1.0:
            raise InvalidConfigException("beta values must lie in (0, 1), got {}".format(beta))


def check_train_config(config):
    # type: (TrainConfig) -> None
    if config.learning_rate <= 0:
        raise InvalidConfigException("learning_rate must be positive")
    if config.batch_size < 1:
        raise InvalidConfigException("batch_size must be at least 1")
    if config.early_stop_patience < 1:
        raise InvalidConfigException("early_stop_patience must be at least 1")
    if config.validation_interval < 1:
        raise InvalidConfigException("validation_interval must be at least 1")
    if not 0.0 <= config.ema_decay < 1.0:
        raise InvalidConfigException("ema_decay must lie in [0, 1)")


def check_metric_config(config):
    # type: (MetricConfig) -> None
    if config.bins < 2:
        raise InvalidConfigException("bins must be at least 2")
    if config.k < 1:
        raise InvalidConfigException("k must be at least 1")
