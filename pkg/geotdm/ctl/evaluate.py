import logging
import os
import sys
from typing import TYPE_CHECKING

from geotdm.constants import SPLITS
from geotdm.ctl.base import CtlCommand, EXIT_FAILURE, EXIT_USAGE
from geotdm.ctl.util import output_path, positive_int
from geotdm.entities.metric_report import Baseline
from geotdm.usecases.evaluate_samples import EvaluateSamplesUI

if TYPE_CHECKING:
    from argparse import ArgumentParser, Namespace
    from geotdm.entities.metric_report import MetricReport
    from geotdm.settings import Settings
    from geotdm.usecases.factory import UseCaseFactory


class EvaluateCommand(CtlCommand, EvaluateSamplesUI):
    """Command to score generated trajectories or a baseline.

    The table is printed on standard output and the same metrics are written as YAML to
    <name>.report.yaml in the output directory.
    """

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        parser.add_argument("samples", nargs="?", default=None, help="Generated GTRJ file.")
        parser.add_argument(
            "--baseline",
            choices=[b.value for b in Baseline],
            default=None,
            help="Score a baseline on the dataset instead of generated trajectories.",
        )
        parser.add_argument(
            "--split", choices=SPLITS, default="test", help="Dataset split for --baseline."
        )
        parser.add_argument(
            "--count", type=positive_int, default=None, help="Trajectories for --baseline."
        )
        parser.add_argument(
            "--no-surrogate",
            dest="surrogate",
            action="store_false",
            help="Skip the classification and prediction scores.",
        )

    def __init__(self, settings, usecase_factory):
        # type: (Settings, UseCaseFactory) -> None
        self.settings = settings
        self.usecase_factory = usecase_factory

    def evaluated_samples(self, report, rendered):
        # type: (MetricReport, str) -> None
        sys.stdout.write(rendered)

    def evaluate_samples_failed_samples(self, path, message):
        # type: (str, str) -> None
        logging.critical("cannot read samples %s: %s", path, message)
        sys.exit(EXIT_FAILURE)

    def evaluate_samples_failed_dataset(self, directory, message):
        # type: (str, str) -> None
        logging.critical("cannot read dataset in %s: %s", directory, message)
        sys.exit(EXIT_FAILURE)

    def evaluate_samples_failed_metrics(self, message):
        # type: (str) -> None
        logging.critical("cannot evaluate: %s", message)
        sys.exit(EXIT_FAILURE)

    def evaluate_samples_failed_io(self, path, message):
        # type: (str, str) -> None
        logging.critical("cannot write report %s: %s", path, message)
        sys.exit(EXIT_FAILURE)

    def run(self, args):
        # type: (Namespace) -> None
        if (args.samples is None) == (args.baseline is None):
            logging.critical("give either a samples file or --baseline")
            sys.exit(EXIT_USAGE)
        usecase = self.usecase_factory.create_evaluate_samples_usecase(self)
        if args.samples is not None:
            name = os.path.splitext(os.path.basename(args.samples))[0]
            report_path = output_path(self.settings, "{}.report.yaml".format(name))
            usecase.evaluate_samples(args.samples, report_path, args.surrogate)
        else:
            report_path = output_path(self.settings, "{}.report.yaml".format(args.baseline))
            usecase.evaluate_baseline(
                Baseline(args.baseline), args.split, args.count, report_path, args.surrogate
            )
