from typing import TYPE_CHECKING

from geotdm.repositories.checkpoint import CheckpointFileRepository
from geotdm.repositories.metrics_log import MetricsLogRepository
from geotdm.repositories.report import ReportFileRepository
from geotdm.repositories.trajectory_file import TrajectoryFileRepository
from geotdm.templating import ReportTemplateEngine

if TYPE_CHECKING:
    from geotdm.settings import Settings


class RepositoryFactory(object):
    """Create the file-backed repositories used by the use cases."""

    def __init__(self, settings):
        # type: (Settings) -> None
        self.settings = settings

    def create_trajectory_repository(self):
        # type: () -> TrajectoryFileRepository
        return TrajectoryFileRepository()

    def create_checkpoint_repository(self):
        # type: () -> CheckpointFileRepository
        return CheckpointFileRepository(self.settings.device)

    def create_metrics_log_repository(self):
        # type: () -> MetricsLogRepository
        return MetricsLogRepository()

    def create_report_repository(self):
        # type: () -> ReportFileRepository
        return ReportFileRepository(ReportTemplateEngine())
