"""Interfaces used by use cases to talk to storage.

Do not define UI interfaces to talk to frontends here.  There is one UI interface per use case,
defined in the same file as the use case.

By convention, all class names here end in Interface.
"""

from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING

import torch
from six import with_metaclass

if TYPE_CHECKING:
    from geotdm.egtn.model import EgtnModel
    from geotdm.entities.checkpoint import CheckpointMetadata
    from geotdm.entities.metric_report import MetricReport
    from geotdm.entities.sample_set import SampleSetMetadata
    from geotdm.entities.system import DatasetManifest, SystemSpec
    from geotdm.entities.training import MetricsLogEntry
    from geotdm.entities.trajectory import GeoTrajectory, TrajectoryBatch
    from torch.optim import Optimizer
    from typing import Any, Dict, List, Optional, Sequence, Tuple

    SplitBatches = Dict[str, TrajectoryBatch]


class TrajectoryStoreInterface(with_metaclass(ABCMeta, object)):
    """Storage of simulated datasets and generated trajectories in GTRJ files."""

    @abstractmethod
    def write_dataset(self, directory, spec, manifest, dataset):
        # type: (str, SystemSpec, DatasetManifest, Dict[str, List[GeoTrajectory]]) -> None
        pass

    @abstractmethod
    def read_manifest(self, directory):
        # type: (str) -> Tuple[SystemSpec, DatasetManifest]
        pass

    @abstractmethod
    def read_split(self, directory, split):
        # type: (str, str) -> List[GeoTrajectory]
        pass

    @abstractmethod
    def load_dataset(self, directory, dtype=torch.float32):
        # type: (str, torch.dtype) -> Tuple[SystemSpec, DatasetManifest, SplitBatches]
        """Read the manifest and every split, stacked into batches."""
        pass

    @abstractmethod
    def write_samples(self, path, trajectories, metadata):
        # type: (str, Sequence[GeoTrajectory], SampleSetMetadata) -> None
        pass

    @abstractmethod
    def read_samples(self, path):
        # type: (str) -> Tuple[List[GeoTrajectory], SampleSetMetadata]
        pass

    @abstractmethod
    def export_csv(self, path, trajectories):
        # type: (str, Sequence[GeoTrajectory]) -> None
        pass


class CheckpointStoreInterface(with_metaclass(ABCMeta, object)):
    """Storage of model parameters, optimizer moments, and training metadata."""

    @abstractmethod
    def save_checkpoint(self, path, model, optimizer, metadata):
        # type: (str, EgtnModel, Optional[Optimizer], CheckpointMetadata) -> None
        pass

    @abstractmethod
    def load_model(self, path):
        # type: (str) -> Tuple[EgtnModel, CheckpointMetadata]
        """Build a model from the configuration stored in the checkpoint and load its weights."""
        pass

    @abstractmethod
    def load_into(self, path, model, optimizer=None):
        # type: (str, EgtnModel, Optional[Optimizer]) -> CheckpointMetadata
        """Load weights (and optimizer moments, if given an optimizer) into existing objects."""
        pass


class MetricsLogInterface(with_metaclass(ABCMeta, object)):
    """Line-per-entry log of training progress."""

    @abstractmethod
    def clear(self, path):
        # type: (str) -> None
        pass

    @abstractmethod
    def append(self, path, entry):
        # type: (str, MetricsLogEntry) -> None
        pass

    @abstractmethod
    def read(self, path):
        # type: (str) -> List[MetricsLogEntry]
        pass


class ReportStoreInterface(with_metaclass(ABCMeta, object)):
    """Storage and rendering of metric reports."""

    @abstractmethod
    def render_report(self, report, title):
        # type: (MetricReport, str) -> str
        pass

    @abstractmethod
    def write_report(self, path, report, extra=None):
        # type: (str, MetricReport, Optional[Dict[str, Any]]) -> None
        pass
