from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING

from six import with_metaclass

from geotdm.exc import NumericalError, SimulationError
from geotdm.sim import build_dataset

if TYPE_CHECKING:
    from geotdm.entities.system import DatasetManifest, SystemSpec
    from geotdm.usecases.interfaces import TrajectoryStoreInterface


class BuildDatasetUI(with_metaclass(ABCMeta, object)):
    """Abstract base class for UI for BuildDataset."""

    @abstractmethod
    def built_dataset(self, directory, manifest):
        # type: (str, DatasetManifest) -> None
        pass

    @abstractmethod
    def build_dataset_failed_simulation(self, message):
        # type: (str) -> None
        pass

    @abstractmethod
    def build_dataset_failed_io(self, directory, message):
        # type: (str, str) -> None
        pass


class BuildDataset(object):
    """Simulate the train, valid, and test splits of an N-body dataset and store them."""

    def __init__(self, ui, trajectory_service):
        # type: (BuildDatasetUI, TrajectoryStoreInterface) -> None
        self.ui = ui
        self.trajectory_service = trajectory_service

    def build_dataset(self, spec, manifest, directory):
        # type: (SystemSpec, DatasetManifest, str) -> None
        try:
            dataset = build_dataset(spec, manifest)
        except (SimulationError, NumericalError) as e:
            self.ui.build_dataset_failed_simulation(str(e))
            return

        try:
            self.trajectory_service.write_dataset(directory, spec, manifest, dataset)
        except (IOError, OSError) as e:
            self.ui.build_dataset_failed_io(directory, str(e))
            return
        self.ui.built_dataset(directory, manifest)
