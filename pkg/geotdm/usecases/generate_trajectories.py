"""Generation of trajectories from trained diffusion models.

Every generation reads the graphs (node features and adjacency) it generates for from a split of
the dataset in settings.data_dir, and conditional generations also read their condition frames
from it.  The generated trajectories are written trajectory-major to a GTRJ file together with a
YAML sidecar describing how they were made, so they can be evaluated against the same split.
"""

import logging
from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING

import torch
from six import with_metaclass

from geotdm.baselines import constant_velocity_baseline, linear_interpolation_baseline
from geotdm.constants import SPLITS
from geotdm.diffusion.compose import compose_long
from geotdm.diffusion.cond import interpolate, refine_trajectory, sample_cond
from geotdm.diffusion.schedule import schedule_from_config
from geotdm.diffusion.uncond import sample_uncond
from geotdm.entities.config import Task, TrainMode
from geotdm.entities.sample_set import Generation, SampleSetMetadata
from geotdm.entities.trajectory import GeoTrajectory
from geotdm.exc import (
    CheckpointError,
    DiffusionError,
    InvalidManifestError,
    NumericalError,
    SimulationError,
    TrajectoryFileError,
)
from geotdm.geom import adjacency_to_edges
from geotdm.sim import split_windows
from geotdm.train import windows_to

if TYPE_CHECKING:
    from geotdm.egtn.model import EgtnModel
    from geotdm.entities.checkpoint import CheckpointMetadata
    from geotdm.entities.system import SystemSpec
    from geotdm.entities.trajectory import TrajectoryBatch, TrajectoryWindows
    from geotdm.settings import Settings
    from geotdm.usecases.interfaces import CheckpointStoreInterface, TrajectoryStoreInterface
    from torch import Tensor
    from typing import Callable, Iterator, List, Optional, Tuple

    # Generates the samples of one chunk of trajectories: (index, sample number) -> B x T x N x D.
    ChunkSampler = Callable[[Tensor, int], Tensor]
    LoadedModel = Tuple[EgtnModel, CheckpointMetadata]
    PreparedWindows = Tuple[SystemSpec, TrajectoryWindows, int]

logger = logging.getLogger(__name__)


class GenerateTrajectoriesUI(with_metaclass(ABCMeta, object)):
    """Abstract base class for UI for GenerateTrajectories."""

    @abstractmethod
    def generated_trajectories(self, path, metadata):
        # type: (str, SampleSetMetadata) -> None
        pass

    @abstractmethod
    def generate_trajectories_failed_checkpoint(self, path, message):
        # type: (str, str) -> None
        pass

    @abstractmethod
    def generate_trajectories_failed_dataset(self, directory, message):
        # type: (str, str) -> None
        pass

    @abstractmethod
    def generate_trajectories_failed_invalid(self, message):
        # type: (str) -> None
        pass

    @abstractmethod
    def generate_trajectories_failed_io(self, path, message):
        # type: (str, str) -> None
        pass


class GenerateTrajectories(object):
    """Sample, forecast, interpolate, refine, or compose trajectories with trained models."""

    def __init__(
        self,
        ui,  # type: GenerateTrajectoriesUI
        settings,  # type: Settings
        trajectory_service,  # type: TrajectoryStoreInterface
        checkpoint_service,  # type: CheckpointStoreInterface
    ):
        # type: (...) -> None
        self.ui = ui
        self.settings = settings
        self.trajectory_service = trajectory_service
        self.checkpoint_service = checkpoint_service

    def sample(self, checkpoint_path, out_path, split="test", count=None, export_path=None):
        # type: (str, str, str, Optional[int], Optional[str]) -> None
        """Draw count unconditional trajectories, on the graphs of split cycled as needed."""
        loaded = self._load_model(checkpoint_path, TrainMode.UNCOND)
        if loaded is None:
            return
        model, metadata = loaded
        data = self._load_split(split)
        if data is None:
            return
        spec, batch = data
        if count is None:
            count = batch.coords.shape[0]
        if count < 1:
            self.ui.generate_trajectories_failed_invalid("count must be at least 1")
            return
        index = torch.arange(count) % batch.coords.shape[0]
        batch = batch._replace(
            coords=batch.coords[index],
            node_features=batch.node_features[index],
            adjacency=batch.adjacency[index],
        )
        schedule = schedule_from_config(metadata.schedule_config)
        generator = self._generator()

        def sampler(chunk, _):
            # type: (Tensor, int) -> Tensor
            return sample_uncond(
                model,
                metadata.n_frames,
                batch.node_features[chunk],
                batch.adjacency[chunk],
                spec.dim,
                schedule,
                generator,
            )

        self._generate(
            sampler,
            count,
            1,
            batch.node_features,
            batch.adjacency,
            spec,
            self._metadata(Generation.SAMPLE, spec, split, count, 1, metadata, 0),
            out_path,
            export_path,
        )

    def forecast(self, checkpoint_path, out_path, split="test", count=None, k=1, export_path=None):
        # type: (str, str, str, Optional[int], int, Optional[str]) -> None
        """Draw k continuations of each of the first count trajectories of split."""
        self._conditional(Task.FORECAST, checkpoint_path, out_path, split, count, k, export_path)

    def interpolate(
        self, checkpoint_path, out_path, split="test", count=None, k=1, export_path=None
    ):
        # type: (str, str, str, Optional[int], int, Optional[str]) -> None
        """Draw k fillings of the gap between the head and tail frames of each trajectory."""
        self._conditional(
            Task.INTERPOLATE, checkpoint_path, out_path, split, count, k, export_path
        )

    def refine(
        self,
        checkpoint_path,  # type: str
        out_path,  # type: str
        k_steps,  # type: int
        split="test",  # type: str
        count=None,  # type: Optional[int]
        k=1,  # type: int
        init_path=None,  # type: Optional[str]
        export_path=None,  # type: Optional[str]
    ):
        # type: (...) -> None
        """Refine rough target frames by diffusing them k_steps steps and denoising them back.

        The rough frames are read from the generated trajectories at init_path, each of which is
        refined once, or else come from the constant velocity (forecasting) or straight-line
        (interpolation) baseline, refined k times.
        """
        loaded = self._load_model(checkpoint_path, TrainMode.COND)
        if loaded is None:
            return
        model, metadata = loaded
        schedule = schedule_from_config(metadata.schedule_config)
        if not 0 <= k_steps <= schedule.n_steps:
            msg = "k_steps must lie in [0, {}], got {}".format(schedule.n_steps, k_steps)
            self.ui.generate_trajectories_failed_invalid(msg)
            return

        initial = None  # type: Optional[Tensor]
        if init_path is not None:
            rough = self._read_initial(init_path, metadata)
            if rough is None:
                return
            initial, split, k = rough
            count = initial.shape[0]
        prepared = self._prepare_windows(metadata, split, count)
        if prepared is None:
            return
        spec, windows, count = prepared
        if initial is None:
            initial = self._baseline(windows, metadata).unsqueeze(1).expand(-1, k, -1, -1, -1)
        initial = initial.to(windows.target)
        generator = self._generator()

        def sampler(chunk, sample):
            # type: (Tensor, int) -> Tensor
            return refine_trajectory(
                model,
                initial[chunk, sample],
                windows.condition[chunk],
                windows.node_features[chunk],
                windows.adjacency[chunk],
                k_steps,
                schedule,
                generator,
                windows.condition_times,
            )

        self._generate(
            sampler,
            count,
            k,
            windows.node_features,
            windows.adjacency,
            spec,
            self._metadata(Generation.REFINE, spec, split, count, k, metadata),
            out_path,
            export_path,
        )

    def compose(
        self,
        cond_checkpoint_path,  # type: str
        out_path,  # type: str
        n_segments,  # type: int
        uncond_checkpoint_path=None,  # type: Optional[str]
        split="test",  # type: str
        count=None,  # type: Optional[int]
        export_path=None,  # type: Optional[str]
    ):
        # type: (...) -> None
        """Chain segment models into trajectories n_segments times as long as one segment.

        The first segment is sampled from the unconditional model if one is given and is
        otherwise the target window of each trajectory of split, so the conditional model extends
        real trajectories.
        """
        loaded = self._load_model(cond_checkpoint_path, TrainMode.COND, Task.FORECAST)
        if loaded is None:
            return
        cond_model, metadata = loaded
        uncond_model = None  # type: Optional[EgtnModel]
        if uncond_checkpoint_path is not None:
            uncond = self._load_model(uncond_checkpoint_path, TrainMode.UNCOND)
            if uncond is None:
                return
            uncond_model, uncond_metadata = uncond
            if uncond_metadata.n_frames != metadata.n_frames:
                msg = "segment lengths differ: {} unconditional, {} conditional frames".format(
                    uncond_metadata.n_frames, metadata.n_frames
                )
                self.ui.generate_trajectories_failed_invalid(msg)
                return
        if n_segments < 1:
            self.ui.generate_trajectories_failed_invalid("n_segments must be at least 1")
            return
        if metadata.cond_frames > metadata.n_frames:
            msg = "the conditional model needs {} condition frames but segments have {}".format(
                metadata.cond_frames, metadata.n_frames
            )
            self.ui.generate_trajectories_failed_invalid(msg)
            return

        prepared = self._prepare_windows(metadata, split, count)
        if prepared is None:
            return
        spec, windows, count = prepared
        schedule = schedule_from_config(metadata.schedule_config)
        generator = self._generator()

        def sampler(chunk, _):
            # type: (Tensor, int) -> Tensor
            return compose_long(
                uncond_model,
                cond_model,
                n_segments,
                metadata.n_frames,
                windows.node_features[chunk],
                windows.adjacency[chunk],
                spec.dim,
                schedule,
                generator,
                first_segment=None if uncond_model is not None else windows.target[chunk],
                cond_frames=metadata.cond_frames,
            )

        sidecar = self._metadata(Generation.COMPOSE, spec, split, count, 1, metadata, 0)
        sidecar = sidecar._replace(n_frames=n_segments * metadata.n_frames)
        self._generate(
            sampler,
            count,
            1,
            windows.node_features,
            windows.adjacency,
            spec,
            sidecar,
            out_path,
            export_path,
        )

    def _conditional(self, task, checkpoint_path, out_path, split, count, k, export_path):
        # type: (Task, str, str, str, Optional[int], int, Optional[str]) -> None
        loaded = self._load_model(checkpoint_path, TrainMode.COND, task)
        if loaded is None:
            return
        model, metadata = loaded
        prepared = self._prepare_windows(metadata, split, count)
        if prepared is None:
            return
        spec, windows, count = prepared
        schedule = schedule_from_config(metadata.schedule_config)
        generator = self._generator()
        head = metadata.cond_frames // 2

        def sampler(chunk, _):
            # type: (Tensor, int) -> Tensor
            h = windows.node_features[chunk]
            adjacency = windows.adjacency[chunk]
            condition = windows.condition[chunk]
            if task == Task.INTERPOLATE:
                return interpolate(
                    model,
                    condition[:, :head],
                    condition[:, head:],
                    metadata.n_frames,
                    h,
                    adjacency,
                    schedule,
                    generator,
                )
            return sample_cond(
                model,
                condition,
                h,
                adjacency,
                metadata.n_frames,
                schedule,
                generator,
                windows.condition_times,
            )

        generation = Generation.FORECAST if task == Task.FORECAST else Generation.INTERPOLATE
        self._generate(
            sampler,
            count,
            k,
            windows.node_features,
            windows.adjacency,
            spec,
            self._metadata(generation, spec, split, count, k, metadata),
            out_path,
            export_path,
        )

    def _generator(self):
        # type: () -> torch.Generator
        return torch.Generator().manual_seed(self.settings.seed)

    def _load_model(self, path, mode, task=None):
        # type: (str, TrainMode, Optional[Task]) -> Optional[LoadedModel]
        try:
            model, metadata = self.checkpoint_service.load_model(path)
        except (IOError, OSError, CheckpointError) as e:
            self.ui.generate_trajectories_failed_checkpoint(path, str(e))
            return None
        if metadata.mode != mode:
            msg = "checkpoint holds a {} model, {} is needed".format(
                metadata.mode.value, mode.value
            )
            self.ui.generate_trajectories_failed_checkpoint(path, msg)
            return None
        if task is not None and metadata.task != task:
            msg = "checkpoint was trained to {}, not to {}".format(
                metadata.task.value, task.value
            )
            self.ui.generate_trajectories_failed_checkpoint(path, msg)
            return None
        model.eval()
        return model, metadata

    def _load_split(self, split):
        # type: (str) -> Optional[Tuple[SystemSpec, TrajectoryBatch]]
        if split not in SPLITS:
            msg = "unknown split {}, expected one of {}".format(split, ", ".join(SPLITS))
            self.ui.generate_trajectories_failed_invalid(msg)
            return None
        data_dir = self.settings.data_dir
        try:
            spec, _, batches = self.trajectory_service.load_dataset(data_dir)
        except (IOError, OSError, InvalidManifestError, TrajectoryFileError) as e:
            self.ui.generate_trajectories_failed_dataset(data_dir, str(e))
            return None
        device = torch.device(self.settings.device)
        batch = batches[split]
        return spec, batch._make(tensor.to(device) for tensor in batch)

    def _prepare_windows(self, metadata, split, count):
        # type: (CheckpointMetadata, str, Optional[int]) -> Optional[PreparedWindows]
        data = self._load_split(split)
        if data is None:
            return None
        spec, batch = data
        available = batch.coords.shape[0]
        if count is None:
            count = available
        if not 1 <= count <= available:
            msg = "count must lie in [1, {}] for split {}, got {}".format(available, split, count)
            self.ui.generate_trajectories_failed_invalid(msg)
            return None
        try:
            windows = split_windows(
                batch.coords[:count],
                batch.node_features[:count],
                batch.adjacency[:count],
                metadata.cond_frames,
                metadata.n_frames,
                metadata.task,
            )
        except SimulationError as e:
            self.ui.generate_trajectories_failed_invalid(str(e))
            return None
        return spec, windows_to(windows, batch.coords.device), count

    def _read_initial(self, path, metadata):
        # type: (str, CheckpointMetadata) -> Optional[Tuple[Tensor, str, int]]
        """Read rough trajectories to refine, as an n x K x T x N x D tensor."""
        try:
            trajectories, sidecar = self.trajectory_service.read_samples(path)
        except (IOError, OSError, InvalidManifestError, TrajectoryFileError) as e:
            self.ui.generate_trajectories_failed_dataset(path, str(e))
            return None
        if sidecar.n_frames != metadata.n_frames or sidecar.task != metadata.task.value:
            msg = "{} holds {}-frame {} trajectories, the model refines {}-frame {} ones".format(
                path, sidecar.n_frames, sidecar.task, metadata.n_frames, metadata.task.value
            )
            self.ui.generate_trajectories_failed_invalid(msg)
            return None
        coords = torch.stack([t.coords for t in trajectories])
        shape = (sidecar.n_trajectories, sidecar.samples_per_trajectory) + coords.shape[1:]
        return coords.reshape(shape), sidecar.split, sidecar.samples_per_trajectory

    @staticmethod
    def _baseline(windows, metadata):
        # type: (TrajectoryWindows, CheckpointMetadata) -> Tensor
        if metadata.task == Task.INTERPOLATE:
            head = metadata.cond_frames // 2
            return linear_interpolation_baseline(
                windows.condition[:, :head], windows.condition[:, head:], metadata.n_frames
            )
        return constant_velocity_baseline(windows.condition, metadata.n_frames)

    def _metadata(
        self,
        generation,  # type: Generation
        spec,  # type: SystemSpec
        split,  # type: str
        count,  # type: int
        k,  # type: int
        metadata,  # type: CheckpointMetadata
        cond_frames=None,  # type: Optional[int]
    ):
        # type: (...) -> SampleSetMetadata
        return SampleSetMetadata(
            generation=generation,
            kind=spec.kind.value,
            data_dir=self.settings.data_dir,
            split=split,
            n_trajectories=count,
            samples_per_trajectory=k,
            n_frames=metadata.n_frames,
            cond_frames=metadata.cond_frames if cond_frames is None else cond_frames,
            task=metadata.task.value,
            seed=self.settings.seed,
        )

    def _chunks(self, count):
        # type: (int) -> Iterator[Tensor]
        size = self.settings.train.batch_size
        for start in range(0, count, size):
            yield torch.arange(start, min(count, start + size))

    def _generate(
        self,
        sampler,  # type: ChunkSampler
        count,  # type: int
        k,  # type: int
        node_features,  # type: Tensor
        adjacency,  # type: Tensor
        spec,  # type: SystemSpec
        metadata,  # type: SampleSetMetadata
        out_path,  # type: str
        export_path,  # type: Optional[str]
    ):
        # type: (...) -> None
        """Run sampler over every chunk and sample number, then store the results."""
        if k < 1:
            self.ui.generate_trajectories_failed_invalid("k must be at least 1")
            return
        generated = []  # type: List[Tensor]
        try:
            for chunk in self._chunks(count):
                samples = [sampler(chunk.to(node_features.device), s) for s in range(k)]
                generated.append(torch.stack(samples, dim=1).cpu())
                logger.debug("generated %d of %d trajectories", int(chunk[-1]) + 1, count)
        except (DiffusionError, NumericalError) as e:
            self.ui.generate_trajectories_failed_invalid(str(e))
            return
        coords = torch.cat(generated)

        trajectories = []  # type: List[GeoTrajectory]
        for i in range(count):
            edges = adjacency_to_edges(adjacency[i].cpu())
            for s in range(k):
                trajectories.append(
                    GeoTrajectory(coords[i, s], node_features[i].cpu(), edges, spec.dt)
                )
        try:
            self.trajectory_service.write_samples(out_path, trajectories, metadata)
            if export_path is not None:
                self.trajectory_service.export_csv(export_path, trajectories)
        except (IOError, OSError) as e:
            self.ui.generate_trajectories_failed_io(out_path, str(e))
            return
        self.ui.generated_trajectories(out_path, metadata)
