import logging
import os
from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING

import torch
from six import with_metaclass

from geotdm.diffusion.schedule import schedule_from_config
from geotdm.egtn.model import EgtnModel
from geotdm.entities.checkpoint import CheckpointMetadata
from geotdm.entities.training import INITIAL_TRAINING_STATE
from geotdm.exc import (
    CheckpointError,
    DiffusionError,
    InvalidManifestError,
    NumericalError,
    SimulationError,
    TrajectoryFileError,
)
from geotdm.sim import split_windows
from geotdm.train import make_optimizer, train_run, TrainingListener, windows_to

if TYPE_CHECKING:
    from geotdm.entities.config import TrainConfig, TrainMode
    from geotdm.entities.system import DatasetManifest
    from geotdm.entities.training import MetricsLogEntry, TrainingState, TrainingSummary
    from geotdm.entities.trajectory import TrajectoryBatch, TrajectoryWindows
    from geotdm.settings import Settings
    from geotdm.usecases.interfaces import (
        CheckpointStoreInterface,
        MetricsLogInterface,
        TrajectoryStoreInterface,
    )
    from torch.optim import Optimizer
    from typing import Optional

logger = logging.getLogger(__name__)


def metrics_log_path(checkpoint_path):
    # type: (str) -> str
    """The metrics log lives next to the checkpoint: model.ckpt logs to model.metrics.jsonl."""
    return os.path.splitext(checkpoint_path)[0] + ".metrics.jsonl"


class TrainModelUI(with_metaclass(ABCMeta, object)):
    """Abstract base class for UI for TrainModel."""

    @abstractmethod
    def trained_model(self, summary, metrics_path):
        # type: (TrainingSummary, str) -> None
        pass

    @abstractmethod
    def train_model_failed_dataset(self, directory, message):
        # type: (str, str) -> None
        pass

    @abstractmethod
    def train_model_failed_checkpoint(self, path, message):
        # type: (str, str) -> None
        pass

    @abstractmethod
    def train_model_failed_invalid(self, message):
        # type: (str) -> None
        pass

    @abstractmethod
    def train_model_failed_numerical(self, message):
        # type: (str) -> None
        pass


class _StoreListener(TrainingListener):
    """Writes the checkpoints and metrics log of a training run through the storage services."""

    def __init__(
        self,
        checkpoint_service,  # type: CheckpointStoreInterface
        metrics_log_service,  # type: MetricsLogInterface
        checkpoint_path,  # type: str
        metrics_path,  # type: str
        metadata,  # type: CheckpointMetadata
    ):
        # type: (...) -> None
        self.checkpoint_service = checkpoint_service
        self.metrics_log_service = metrics_log_service
        self.checkpoint_path = checkpoint_path
        self.metrics_path = metrics_path
        self.metadata = metadata

    def record_metrics(self, entry):
        # type: (MetricsLogEntry) -> None
        self.metrics_log_service.append(self.metrics_path, entry)

    def save_checkpoint(self, model, optimizer, state):
        # type: (EgtnModel, Optimizer, TrainingState) -> str
        metadata = self.metadata._replace(state=state)
        self.checkpoint_service.save_checkpoint(self.checkpoint_path, model, optimizer, metadata)
        return self.checkpoint_path


class TrainModel(object):
    """Train an unconditional or conditional diffusion model on a stored dataset."""

    def __init__(
        self,
        ui,  # type: TrainModelUI
        settings,  # type: Settings
        trajectory_service,  # type: TrajectoryStoreInterface
        checkpoint_service,  # type: CheckpointStoreInterface
        metrics_log_service,  # type: MetricsLogInterface
    ):
        # type: (...) -> None
        self.ui = ui
        self.settings = settings
        self.trajectory_service = trajectory_service
        self.checkpoint_service = checkpoint_service
        self.metrics_log_service = metrics_log_service

    def train_model(self, checkpoint_path, mode=None, resume=False):
        # type: (str, Optional[TrainMode], bool) -> None
        """Train on settings.data_dir and write the best model to checkpoint_path.

        With resume set and a checkpoint already at checkpoint_path, its weights, optimizer
        moments, and training state are restored and the metrics log is appended to.  Otherwise
        the log is started afresh.
        """
        config = self.settings.train
        if mode is not None:
            config = config._replace(mode=mode)
        device = torch.device(self.settings.device)
        data_dir = self.settings.data_dir

        try:
            _, manifest, batches = self.trajectory_service.load_dataset(data_dir)
        except (IOError, OSError, InvalidManifestError, TrajectoryFileError) as e:
            self.ui.train_model_failed_dataset(data_dir, str(e))
            return

        feature_dim = batches["train"].node_features.shape[-1]
        if feature_dim != self.settings.model.feature_dim:
            msg = "dataset has {} node features but model.feature_dim is {}".format(
                feature_dim, self.settings.model.feature_dim
            )
            self.ui.train_model_failed_invalid(msg)
            return
        try:
            train_windows = self._windows(batches["train"], manifest, config, device)
            valid_windows = self._windows(batches["valid"], manifest, config, device)
        except SimulationError as e:
            self.ui.train_model_failed_invalid(str(e))
            return

        torch.manual_seed(config.seed)
        model = EgtnModel(self.settings.model, manifest.target_frames).to(device)
        optimizer = make_optimizer(model, config)
        metadata = CheckpointMetadata(
            model_config=self.settings.model,
            schedule_config=self.settings.schedule,
            n_frames=manifest.target_frames,
            cond_frames=manifest.cond_frames,
            mode=config.mode,
            task=config.task,
            state=INITIAL_TRAINING_STATE,
        )
        metrics_path = metrics_log_path(checkpoint_path)
        state = INITIAL_TRAINING_STATE
        if resume and os.path.exists(checkpoint_path):
            try:
                stored = self.checkpoint_service.load_into(checkpoint_path, model, optimizer)
            except (IOError, OSError, CheckpointError) as e:
                self.ui.train_model_failed_checkpoint(checkpoint_path, str(e))
                return
            if (stored.mode, stored.task) != (config.mode, config.task):
                msg = "checkpoint was trained for {} {}, not {} {}".format(
                    stored.mode.value, stored.task.value, config.mode.value, config.task.value
                )
                self.ui.train_model_failed_checkpoint(checkpoint_path, msg)
                return
            state = stored.state
            logger.info("resuming from %s at step %d", checkpoint_path, state.step)
        else:
            self.metrics_log_service.clear(metrics_path)

        listener = _StoreListener(
            self.checkpoint_service,
            self.metrics_log_service,
            checkpoint_path,
            metrics_path,
            metadata,
        )
        try:
            summary = train_run(
                config,
                train_windows,
                valid_windows,
                model,
                schedule_from_config(self.settings.schedule),
                listener,
                optimizer,
                state,
            )
        except (NumericalError, DiffusionError) as e:
            self.ui.train_model_failed_numerical(str(e))
            return
        except (IOError, OSError) as e:
            self.ui.train_model_failed_checkpoint(checkpoint_path, str(e))
            return
        self.ui.trained_model(summary, metrics_path)

    @staticmethod
    def _windows(batch, manifest, config, device):
        # type: (TrajectoryBatch, DatasetManifest, TrainConfig, torch.device) -> TrajectoryWindows
        windows = split_windows(
            batch.coords,
            batch.node_features,
            batch.adjacency,
            manifest.cond_frames,
            manifest.target_frames,
            config.task,
        )
        return windows_to(windows, device)
