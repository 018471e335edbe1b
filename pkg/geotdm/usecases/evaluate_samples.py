import logging
from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING

import torch
from six import with_metaclass

from geotdm.baselines import (
    constant_velocity_baseline,
    gaussian_trajectory_baseline,
    linear_interpolation_baseline,
)
from geotdm.constants import SPLITS
from geotdm.entities.config import Task
from geotdm.entities.metric_report import Baseline, MetricReport
from geotdm.entities.trajectory import TrajectoryBatch
from geotdm.exc import (
    EvaluationError,
    InvalidManifestError,
    SimulationError,
    TrajectoryFileError,
)
from geotdm.metrics import ade_fde, marginal_score, min_over_k, surrogate_scores
from geotdm.sim import split_windows

if TYPE_CHECKING:
    from geotdm.entities.trajectory import TrajectoryWindows
    from geotdm.settings import Settings
    from geotdm.usecases.interfaces import ReportStoreInterface, TrajectoryStoreInterface
    from torch import Tensor
    from typing import Any, Dict, Optional

logger = logging.getLogger(__name__)


class EvaluateSamplesUI(with_metaclass(ABCMeta, object)):
    """Abstract base class for UI for EvaluateSamples."""

    @abstractmethod
    def evaluated_samples(self, report, rendered):
        # type: (MetricReport, str) -> None
        pass

    @abstractmethod
    def evaluate_samples_failed_samples(self, path, message):
        # type: (str, str) -> None
        pass

    @abstractmethod
    def evaluate_samples_failed_dataset(self, directory, message):
        # type: (str, str) -> None
        pass

    @abstractmethod
    def evaluate_samples_failed_metrics(self, message):
        # type: (str) -> None
        pass

    @abstractmethod
    def evaluate_samples_failed_io(self, path, message):
        # type: (str, str) -> None
        pass


class EvaluateSamples(object):
    """Score generated trajectories, or a baseline, against the dataset they were made from.

    Generated trajectories are compared with the target windows the models were trained on.
    Conditional generations get displacement errors against their own ground truth: ADE and FDE
    of their first sample and the reduction over all K samples configured in metrics.reduction.
    Every generation gets the marginal score and, unless metrics.surrogate_budget is zero, the
    surrogate classification and prediction scores.
    """

    def __init__(
        self,
        ui,  # type: EvaluateSamplesUI
        settings,  # type: Settings
        trajectory_service,  # type: TrajectoryStoreInterface
        report_service,  # type: ReportStoreInterface
    ):
        # type: (...) -> None
        self.ui = ui
        self.settings = settings
        self.trajectory_service = trajectory_service
        self.report_service = report_service

    def evaluate_samples(self, samples_path, report_path=None, surrogate=True):
        # type: (str, Optional[str], bool) -> None
        try:
            trajectories, metadata = self.trajectory_service.read_samples(samples_path)
        except (IOError, OSError, InvalidManifestError, TrajectoryFileError) as e:
            self.ui.evaluate_samples_failed_samples(samples_path, str(e))
            return
        windows = self._windows(metadata.data_dir, metadata.split, Task(metadata.task))
        if windows is None:
            return
        coords = torch.stack([t.coords for t in trajectories]).to(windows.target.dtype)
        k = metadata.samples_per_trajectory
        generated = coords.reshape((metadata.n_trajectories, k) + tuple(coords.shape[1:]))
        title = "{} samples from {}".format(metadata.generation.value, samples_path)
        extra = {
            "samples": samples_path,
            "generation": metadata.generation.value,
            "split": metadata.split,
        }
        self._report(
            generated, windows, metadata.cond_frames > 0, title, report_path, surrogate, extra
        )

    def evaluate_baseline(
        self,
        baseline,  # type: Baseline
        split="test",  # type: str
        count=None,  # type: Optional[int]
        report_path=None,  # type: Optional[str]
        surrogate=True,  # type: bool
    ):
        # type: (...) -> None
        """Score a baseline on the first count trajectories of split in settings.data_dir."""
        if baseline == Baseline.CONSTANT_VELOCITY:
            task = Task.FORECAST
        elif baseline == Baseline.LINEAR_INTERPOLATION:
            task = Task.INTERPOLATE
        else:
            task = self.settings.train.task
        windows = self._windows(self.settings.data_dir, split, task)
        if windows is None:
            return
        available = windows.target.shape[0]
        if count is None:
            count = available
        if not 1 <= count <= available:
            msg = "count must lie in [1, {}] for split {}, got {}".format(available, split, count)
            self.ui.evaluate_samples_failed_metrics(msg)
            return

        n_frames = windows.target.shape[1]
        condition = windows.condition[:count]
        if baseline == Baseline.CONSTANT_VELOCITY:
            generated = constant_velocity_baseline(condition, n_frames)
        elif baseline == Baseline.LINEAR_INTERPOLATION:
            head = condition.shape[1] // 2
            generated = linear_interpolation_baseline(
                condition[:, :head], condition[:, head:], n_frames
            )
        else:
            generator = torch.Generator().manual_seed(self.settings.seed)
            generated = gaussian_trajectory_baseline(windows.target, count, generator)
        title = "{} baseline".format(baseline.value)
        extra = {"baseline": baseline.value, "split": split}
        conditional = baseline != Baseline.GAUSSIAN
        self._report(
            generated.unsqueeze(1), windows, conditional, title, report_path, surrogate, extra
        )

    def _windows(self, data_dir, split, task):
        # type: (str, str, Task) -> Optional[TrajectoryWindows]
        if split not in SPLITS:
            msg = "unknown split {}, expected one of {}".format(split, ", ".join(SPLITS))
            self.ui.evaluate_samples_failed_metrics(msg)
            return None
        try:
            _, manifest, batches = self.trajectory_service.load_dataset(data_dir)
        except (IOError, OSError, InvalidManifestError, TrajectoryFileError) as e:
            self.ui.evaluate_samples_failed_dataset(data_dir, str(e))
            return None
        batch = batches[split]
        try:
            return split_windows(
                batch.coords,
                batch.node_features,
                batch.adjacency,
                manifest.cond_frames,
                manifest.target_frames,
                task,
            )
        except SimulationError as e:
            self.ui.evaluate_samples_failed_metrics(str(e))
            return None

    def _report(
        self,
        generated,  # type: Tensor
        windows,  # type: TrajectoryWindows
        conditional,  # type: bool
        title,  # type: str
        report_path,  # type: Optional[str]
        surrogate,  # type: bool
        extra,  # type: Dict[str, Any]
    ):
        # type: (...) -> None
        """Compute, render, and store the metrics of n x K x T x N x D generated trajectories."""
        try:
            report = self._metrics(generated, windows, conditional, surrogate)
        except EvaluationError as e:
            self.ui.evaluate_samples_failed_metrics(str(e))
            return
        rendered = self.report_service.render_report(report, title)
        if report_path is not None:
            try:
                self.report_service.write_report(report_path, report, extra)
            except (IOError, OSError) as e:
                self.ui.evaluate_samples_failed_io(report_path, str(e))
                return
        self.ui.evaluated_samples(report, rendered)

    def _metrics(self, generated, windows, conditional, surrogate):
        # type: (Tensor, TrajectoryWindows, bool, bool) -> MetricReport
        config = self.settings.metrics
        reference = windows.target
        if generated.shape[2:] != reference.shape[1:]:
            msg = "generated trajectories are {} but the dataset windows are {}".format(
                "x".join(str(s) for s in generated.shape[2:]),
                "x".join(str(s) for s in reference.shape[1:]),
            )
            raise EvaluationError(msg)
        n, k = generated.shape[:2]
        graphs = torch.arange(n) % reference.shape[0]

        ade = fde = min_ade = min_fde = None
        if conditional:
            if n > reference.shape[0]:
                raise EvaluationError("more conditional samples than dataset trajectories")
            truth = reference[:n]
            ade, fde = ade_fde(generated[:, 0], truth)
            min_ade, min_fde = min_over_k(generated.transpose(0, 1), truth, config.reduction)

        flat = generated.reshape((n * k,) + tuple(generated.shape[2:]))
        marginal = marginal_score(
            flat, reference, config.bins, config.feature, windows.adjacency[0]
        )

        classification = prediction = None
        if surrogate and config.surrogate_budget > 0:
            generated_batch = TrajectoryBatch(
                coords=flat,
                node_features=windows.node_features[graphs].repeat_interleave(k, dim=0),
                adjacency=windows.adjacency[graphs].repeat_interleave(k, dim=0),
            )
            reference_batch = TrajectoryBatch(
                reference, windows.node_features, windows.adjacency
            )
            generator = torch.Generator().manual_seed(self.settings.seed)
            classification, prediction = surrogate_scores(
                generated_batch, reference_batch, config.surrogate_budget, generator
            )
        logger.debug("evaluated %d x %d generated trajectories", n, k)
        return MetricReport(
            ade=ade,
            fde=fde,
            min_ade_k=min_ade,
            min_fde_k=min_fde,
            marginal_score=marginal,
            classification_score=classification,
            prediction_score=prediction,
            k=k,
            bins=config.bins,
        )
