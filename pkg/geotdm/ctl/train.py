import logging
import sys
from typing import TYPE_CHECKING

from geotdm.ctl.base import CtlCommand, EXIT_FAILURE
from geotdm.ctl.util import checkpoint_path
from geotdm.entities.config import TrainMode
from geotdm.usecases.train_model import TrainModelUI

if TYPE_CHECKING:
    from argparse import ArgumentParser, Namespace
    from geotdm.entities.training import TrainingSummary
    from geotdm.settings import Settings
    from geotdm.usecases.factory import UseCaseFactory


class TrainCommand(CtlCommand, TrainModelUI):
    """Command to train a diffusion model on the dataset in common.data_dir."""

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        parser.add_argument(
            "--mode",
            choices=[m.value for m in TrainMode],
            default=None,
            help="Train the unconditional or the conditional model (default from train.mode).",
        )
        parser.add_argument("--ckpt", default=None, help="Where to write the checkpoint.")
        parser.add_argument(
            "--resume",
            action="store_true",
            help="Continue from the checkpoint if it already exists.",
        )

    def __init__(self, settings, usecase_factory):
        # type: (Settings, UseCaseFactory) -> None
        self.settings = settings
        self.usecase_factory = usecase_factory

    def trained_model(self, summary, metrics_path):
        # type: (TrainingSummary, str) -> None
        logging.info(
            "trained %d steps over %d epochs%s, best validation loss %s",
            summary.steps,
            summary.epochs,
            " (stopped early)" if summary.stopped_early else "",
            "n/a" if summary.best_valid_loss is None else "%.6f" % summary.best_valid_loss,
        )
        logging.info("checkpoint %s, metrics log %s", summary.checkpoint_path, metrics_path)

    def train_model_failed_dataset(self, directory, message):
        # type: (str, str) -> None
        logging.critical("cannot read dataset in %s: %s", directory, message)
        sys.exit(EXIT_FAILURE)

    def train_model_failed_checkpoint(self, path, message):
        # type: (str, str) -> None
        logging.critical("checkpoint %s: %s", path, message)
        sys.exit(EXIT_FAILURE)

    def train_model_failed_invalid(self, message):
        # type: (str) -> None
        logging.critical("cannot train: %s", message)
        sys.exit(EXIT_FAILURE)

    def train_model_failed_numerical(self, message):
        # type: (str) -> None
        logging.critical("training diverged: %s", message)
        sys.exit(EXIT_FAILURE)

    def run(self, args):
        # type: (Namespace) -> None
        mode = TrainMode(args.mode) if args.mode else None
        usecase = self.usecase_factory.create_train_model_usecase(self)
        usecase.train_model(checkpoint_path(self.settings, args), mode, args.resume)
