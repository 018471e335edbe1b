from typing import TYPE_CHECKING

from geotdm.usecases.build_dataset import BuildDataset
from geotdm.usecases.check_equivariance import CheckEquivariance
from geotdm.usecases.evaluate_samples import EvaluateSamples
from geotdm.usecases.generate_trajectories import GenerateTrajectories
from geotdm.usecases.train_model import TrainModel

if TYPE_CHECKING:
    from geotdm.plugin.proxy import PluginProxy
    from geotdm.repositories.factory import RepositoryFactory
    from geotdm.settings import Settings
    from geotdm.usecases.build_dataset import BuildDatasetUI
    from geotdm.usecases.check_equivariance import CheckEquivarianceUI
    from geotdm.usecases.evaluate_samples import EvaluateSamplesUI
    from geotdm.usecases.generate_trajectories import GenerateTrajectoriesUI
    from geotdm.usecases.train_model import TrainModelUI


class UseCaseFactory(object):
    """Create use cases with dependency injection."""

    def __init__(self, settings, plugins, repository_factory):
        # type: (Settings, PluginProxy, RepositoryFactory) -> None
        self.settings = settings
        self.plugins = plugins
        self.repository_factory = repository_factory

    def create_build_dataset_usecase(self, ui):
        # type: (BuildDatasetUI) -> BuildDataset
        trajectory_repository = self.repository_factory.create_trajectory_repository()
        return BuildDataset(ui, trajectory_repository)

    def create_train_model_usecase(self, ui):
        # type: (TrainModelUI) -> TrainModel
        trajectory_repository = self.repository_factory.create_trajectory_repository()
        checkpoint_repository = self.repository_factory.create_checkpoint_repository()
        metrics_log_repository = self.repository_factory.create_metrics_log_repository()
        return TrainModel(
            ui,
            self.settings,
            trajectory_repository,
            checkpoint_repository,
            metrics_log_repository,
        )

    def create_generate_trajectories_usecase(self, ui):
        # type: (GenerateTrajectoriesUI) -> GenerateTrajectories
        trajectory_repository = self.repository_factory.create_trajectory_repository()
        checkpoint_repository = self.repository_factory.create_checkpoint_repository()
        return GenerateTrajectories(
            ui, self.settings, trajectory_repository, checkpoint_repository
        )

    def create_evaluate_samples_usecase(self, ui):
        # type: (EvaluateSamplesUI) -> EvaluateSamples
        trajectory_repository = self.repository_factory.create_trajectory_repository()
        report_repository = self.repository_factory.create_report_repository()
        return EvaluateSamples(ui, self.settings, trajectory_repository, report_repository)

    def create_check_equivariance_usecase(self, ui):
        # type: (CheckEquivarianceUI) -> CheckEquivariance
        checkpoint_repository = self.repository_factory.create_checkpoint_repository()
        return CheckEquivariance(ui, self.settings, checkpoint_repository)
