from abc import ABCMeta, abstractmethod
from typing import TYPE_CHECKING

import torch
from six import with_metaclass

from geotdm.diffusion.schedule import make_linear_schedule, schedule_from_config
from geotdm.egtn.model import EgtnModel
from geotdm.exc import CheckpointError, GeometryError, NumericalError
from geotdm.symmetry import check_model_equivariance

if TYPE_CHECKING:
    from geotdm.entities.symmetry import SymmetryCheck
    from geotdm.settings import Settings
    from geotdm.usecases.interfaces import CheckpointStoreInterface
    from typing import List, Optional

PRECISIONS = {"float32": torch.float32, "float64": torch.float64}


class CheckEquivarianceUI(with_metaclass(ABCMeta, object)):
    """Abstract base class for UI for CheckEquivariance."""

    @abstractmethod
    def checked_equivariance(self, checks):
        # type: (List[SymmetryCheck]) -> None
        pass

    @abstractmethod
    def check_equivariance_failed_checkpoint(self, path, message):
        # type: (str, str) -> None
        pass

    @abstractmethod
    def check_equivariance_failed_invalid(self, message):
        # type: (str) -> None
        pass

    @abstractmethod
    def check_equivariance_failed_violations(self, checks):
        # type: (List[SymmetryCheck]) -> None
        pass


class CheckEquivariance(object):
    """Run the symmetry checks against a trained model, or a freshly initialised one."""

    def __init__(self, ui, settings, checkpoint_service):
        # type: (CheckEquivarianceUI, Settings, CheckpointStoreInterface) -> None
        self.ui = ui
        self.settings = settings
        self.checkpoint_service = checkpoint_service

    def check_equivariance(
        self,
        checkpoint_path=None,  # type: Optional[str]
        trials=10,  # type: int
        chain_steps=10,  # type: int
        precision="float32",  # type: str
    ):
        # type: (...) -> None
        """Check the model stored at checkpoint_path, or one built from the settings if None.

        Sampling chains run on a linear schedule of chain_steps steps spanning the model's beta
        range, or on the model's own schedule if that is shorter.
        """
        if precision not in PRECISIONS:
            msg = "precision must be one of {}, got {}".format(", ".join(PRECISIONS), precision)
            self.ui.check_equivariance_failed_invalid(msg)
            return
        if trials < 1 or chain_steps < 1:
            self.ui.check_equivariance_failed_invalid("trials and chain steps must be positive")
            return

        if checkpoint_path is None:
            torch.manual_seed(self.settings.seed)
            model = EgtnModel(self.settings.model, self.settings.dataset.target_frames)
            model = model.to(torch.device(self.settings.device))
            schedule_config = self.settings.schedule
            cond_frames = self.settings.dataset.cond_frames
        else:
            try:
                model, metadata = self.checkpoint_service.load_model(checkpoint_path)
            except (IOError, OSError, CheckpointError) as e:
                self.ui.check_equivariance_failed_checkpoint(checkpoint_path, str(e))
                return
            schedule_config = metadata.schedule_config
            cond_frames = metadata.cond_frames
        model = model.to(PRECISIONS[precision])

        schedule = schedule_from_config(schedule_config)
        chain_schedule = schedule
        if chain_steps < schedule.n_steps:
            chain_schedule = make_linear_schedule(
                chain_steps, schedule_config.beta_start, schedule_config.beta_end
            )
        generator = torch.Generator().manual_seed(self.settings.seed)
        try:
            checks = check_model_equivariance(
                model,
                schedule,
                generator,
                n_nodes=self.settings.system.n_bodies,
                dim=self.settings.system.dim,
                cond_frames=cond_frames,
                trials=trials,
                chain_schedule=chain_schedule,
            )
        except (GeometryError, NumericalError) as e:
            self.ui.check_equivariance_failed_invalid(str(e))
            return

        if all(check.passed for check in checks):
            self.ui.checked_equivariance(checks)
        else:
            self.ui.check_equivariance_failed_violations(checks)
