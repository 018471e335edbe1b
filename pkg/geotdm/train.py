"""Optimization loop for the diffusion models.

Batches are drawn in a seeded order, each step takes one Adam update on the noise-prediction loss
of the configured mode, and the held-out loss is measured every validation_interval epochs with a
fixed noise realisation so that validations are comparable.  Training stops early once the
validation loss fails to improve for early_stop_patience consecutive validations.
"""

import copy
import logging
import time
from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING

import torch
from six import with_metaclass

from geotdm import stats
from geotdm.diffusion.cond import loss_cond
from geotdm.diffusion.uncond import loss_uncond
from geotdm.entities.config import check_train_config, TrainMode
from geotdm.entities.training import INITIAL_TRAINING_STATE, MetricsLogEntry, TrainingSummary
from geotdm.exc import NumericalError

if TYPE_CHECKING:
    from geotdm.egtn.model import EgtnModel
    from geotdm.entities.config import TrainConfig
    from geotdm.entities.diffusion import NoiseSchedule
    from geotdm.entities.training import TrainingState
    from geotdm.entities.trajectory import TrajectoryWindows
    from torch import Tensor
    from typing import Iterator, List, Optional

logger = logging.getLogger(__name__)

# Offset between the training seed and the seed of the fixed validation noise.
VALIDATION_SEED_OFFSET = 1


class TrainingListener(with_metaclass(ABCMeta, object)):
    """Receives the artifacts of a training run."""

    @abstractmethod
    def record_metrics(self, entry):
        # type: (MetricsLogEntry) -> None
        pass

    @abstractmethod
    def save_checkpoint(self, model, optimizer, state):
        # type: (EgtnModel, torch.optim.Optimizer, TrainingState) -> str
        """Persist the model and optimizer and return where they were written."""
        pass


def make_optimizer(model, config):
    # type: (EgtnModel, TrainConfig) -> torch.optim.Adam
    return torch.optim.Adam(
        model.parameters(),
        lr=config.learning_rate,
        betas=(config.adam_beta1, config.adam_beta2),
        eps=config.adam_eps,
    )


def select(windows, index):
    # type: (TrajectoryWindows, Tensor) -> TrajectoryWindows
    return windows._replace(
        target=windows.target[index],
        condition=windows.condition[index],
        node_features=windows.node_features[index],
        adjacency=windows.adjacency[index],
    )


def windows_to(windows, device):
    # type: (TrajectoryWindows, torch.device) -> TrajectoryWindows
    return windows._make(tensor.to(device) for tensor in windows)


def batch_loss(model, windows, schedule, mode, generator):
    # type: (EgtnModel, TrajectoryWindows, NoiseSchedule, TrainMode, torch.Generator) -> Tensor
    if mode == TrainMode.UNCOND:
        return loss_uncond(
            model, windows.target, windows.node_features, windows.adjacency, schedule, generator
        )
    return loss_cond(
        model,
        windows.target,
        windows.condition,
        windows.node_features,
        windows.adjacency,
        schedule,
        generator,
        windows.condition_times,
    )


def batches(n, batch_size, generator):
    # type: (int, int, torch.Generator) -> Iterator[Tensor]
    order = torch.randperm(n, generator=generator)
    for start in range(0, n, batch_size):
        yield order[start : start + batch_size]


def validation_loss(model, windows, schedule, config):
    # type: (EgtnModel, TrajectoryWindows, NoiseSchedule, TrainConfig) -> float
    """Mean held-out loss under a noise realisation fixed by the training seed."""
    generator = torch.Generator().manual_seed(config.seed + VALIDATION_SEED_OFFSET)
    n = windows.target.shape[0]
    total = 0.0
    with torch.no_grad():
        for start in range(0, n, config.batch_size):
            index = torch.arange(start, min(n, start + config.batch_size))
            loss = batch_loss(model, select(windows, index), schedule, config.mode, generator)
            total += float(loss) * index.numel()
    return total / n


class ExponentialMovingAverage(object):
    """Shadow copy of a model whose parameters track an exponential average of the live ones."""

    def __init__(self, model, decay):
        # type: (EgtnModel, float) -> None
        self.decay = decay
        self.model = copy.deepcopy(model)
        for parameter in self.model.parameters():
            parameter.requires_grad_(False)

    def update(self, model):
        # type: (EgtnModel) -> None
        with torch.no_grad():
            for shadow, live in zip(self.model.parameters(), model.parameters()):
                shadow.mul_(self.decay).add_(live, alpha=1.0 - self.decay)


def train_run(
    config,  # type: TrainConfig
    train_windows,  # type: TrajectoryWindows
    valid_windows,  # type: TrajectoryWindows
    model,  # type: EgtnModel
    schedule,  # type: NoiseSchedule
    listener,  # type: TrainingListener
    optimizer=None,  # type: Optional[torch.optim.Optimizer]
    state=INITIAL_TRAINING_STATE,  # type: TrainingState
):
    # type: (...) -> TrainingSummary
    """Train model in place and return a summary of the run.

    The best model by validation loss is handed to the listener whenever it improves (the EMA
    copy when ema_decay is set).  A non-finite training loss aborts the run with NumericalError.
    """
    check_train_config(config)
    if optimizer is None:
        optimizer = make_optimizer(model, config)
    generator = torch.Generator().manual_seed(config.seed)
    ema = ExponentialMovingAverage(model, config.ema_decay) if config.ema_decay > 0 else None
    n_train = train_windows.target.shape[0]
    checkpoint_path = ""
    stopped_early = False
    start_time = time.time()

    def validate(state, train_loss):
        # type: (TrainingState, float) -> TrainingState
        nonlocal checkpoint_path
        evaluated = ema.model if ema is not None else model
        valid_loss = validation_loss(evaluated, valid_windows, schedule, config)
        stats.log_gauge("valid.loss", valid_loss)
        logger.info(
            "epoch %d step %d train_loss %.6f valid_loss %.6f",
            state.epoch,
            state.step,
            train_loss,
            valid_loss,
        )
        elapsed = time.time() - start_time
        listener.record_metrics(
            MetricsLogEntry(state.step, state.epoch, train_loss, valid_loss, elapsed)
        )
        if state.best_valid_loss is None or valid_loss < state.best_valid_loss:
            state = state._replace(best_valid_loss=valid_loss, bad_validations=0)
            checkpoint_path = listener.save_checkpoint(evaluated, optimizer, state)
        else:
            state = state._replace(bad_validations=state.bad_validations + 1)
        return state

    validated = False
    out_of_steps = False
    for epoch in range(state.epoch + 1, config.max_epochs + 1):
        model.train()
        losses = []  # type: List[float]
        for index in batches(n_train, config.batch_size, generator):
            step_start = time.time()
            batch = select(train_windows, index)
            loss = batch_loss(model, batch, schedule, config.mode, generator)
            if not bool(torch.isfinite(loss)):
                raise NumericalError("training loss is not finite at step {}".format(state.step))
            optimizer.zero_grad()
            loss.backward()
            max_norm = config.grad_clip_norm if config.grad_clip_norm > 0 else float("inf")
            grad_norm = torch.nn.utils.clip_grad_norm_(model.parameters(), max_norm)
            optimizer.step()
            if ema is not None:
                ema.update(model)
            state = state._replace(step=state.step + 1)
            losses.append(float(loss))
            stats.log_gauge("train.loss", float(loss))
            stats.log_gauge("train.grad_norm", float(grad_norm))
            stats.log_rate("train.step_seconds", time.time() - step_start)
            if config.max_steps and state.step >= config.max_steps:
                out_of_steps = True
                break

        state = state._replace(epoch=epoch)
        train_loss = sum(losses) / max(len(losses), 1)
        validated = False
        if epoch % config.validation_interval == 0 or out_of_steps or epoch == config.max_epochs:
            state = validate(state, train_loss)
            validated = True
            if state.bad_validations >= config.early_stop_patience:
                logger.warning(
                    "stopping early at epoch %d: no improvement in %d validations",
                    epoch,
                    state.bad_validations,
                )
                stopped_early = True
                break
        else:
            listener.record_metrics(
                MetricsLogEntry(state.step, epoch, train_loss, None, time.time() - start_time)
            )
        if out_of_steps:
            break

    if not checkpoint_path and not validated:
        state = validate(state, float("nan"))

    return TrainingSummary(
        steps=state.step,
        epochs=state.epoch,
        best_valid_loss=state.best_valid_loss,
        stopped_early=stopped_early,
        checkpoint_path=checkpoint_path,
    )
