import logging
import sys
from typing import TYPE_CHECKING

from geotdm.ctl.base import CtlCommand, EXIT_FAILURE
from geotdm.usecases.build_dataset import BuildDatasetUI

if TYPE_CHECKING:
    from argparse import ArgumentParser, Namespace
    from geotdm.entities.system import DatasetManifest
    from geotdm.settings import Settings
    from geotdm.usecases.factory import UseCaseFactory


class SimulateCommand(CtlCommand, BuildDatasetUI):
    """Command to simulate an N-body dataset.

    The dataset is written to --out if given and otherwise to common.data_dir.
    """

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        return

    def __init__(self, settings, usecase_factory):
        # type: (Settings, UseCaseFactory) -> None
        self.settings = settings
        self.usecase_factory = usecase_factory

    def built_dataset(self, directory, manifest):
        # type: (str, DatasetManifest) -> None
        logging.info(
            "wrote %d train, %d valid, and %d test trajectories to %s",
            manifest.n_train,
            manifest.n_valid,
            manifest.n_test,
            directory,
        )

    def build_dataset_failed_simulation(self, message):
        # type: (str) -> None
        logging.critical("simulation failed: %s", message)
        sys.exit(EXIT_FAILURE)

    def build_dataset_failed_io(self, directory, message):
        # type: (str, str) -> None
        logging.critical("cannot write dataset to %s: %s", directory, message)
        sys.exit(EXIT_FAILURE)

    def run(self, args):
        # type: (Namespace) -> None
        directory = args.out or self.settings.data_dir
        usecase = self.usecase_factory.create_build_dataset_usecase(self)
        usecase.build_dataset(self.settings.system, self.settings.dataset, directory)
