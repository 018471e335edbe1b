import logging
import sys
from typing import TYPE_CHECKING

from geotdm.ctl.base import CtlCommand, EXIT_FAILURE
from geotdm.ctl.util import positive_int
from geotdm.usecases.check_equivariance import CheckEquivarianceUI, PRECISIONS

if TYPE_CHECKING:
    from argparse import ArgumentParser, Namespace
    from geotdm.entities.symmetry import SymmetryCheck
    from geotdm.usecases.factory import UseCaseFactory
    from typing import List


def format_checks(checks):
    # type: (List[SymmetryCheck]) -> str
    width = max(len(check.name) for check in checks)
    lines = []
    for check in checks:
        lines.append(
            "{}  {:.3e}  (tolerance {:.0e}, {} trials)  {}".format(
                check.name.ljust(width),
                check.max_deviation,
                check.tolerance,
                check.trials,
                "ok" if check.passed else "FAILED",
            )
        )
    return "\n".join(lines) + "\n"


class CheckEquivarianceCommand(CtlCommand, CheckEquivarianceUI):
    """Command to measure how far a model is from exact rotation and translation symmetry."""

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        parser.add_argument(
            "--ckpt",
            default=None,
            help="Checkpoint to check (default: a freshly initialised model from the config).",
        )
        parser.add_argument(
            "--trials", type=positive_int, default=10, help="Random motions per check."
        )
        parser.add_argument(
            "--chain-steps",
            type=positive_int,
            default=10,
            help="Length of the schedule the sampling chains are checked on.",
        )
        parser.add_argument(
            "--precision", choices=sorted(PRECISIONS), default="float32", help="Float precision."
        )

    def __init__(self, usecase_factory):
        # type: (UseCaseFactory) -> None
        self.usecase_factory = usecase_factory

    def checked_equivariance(self, checks):
        # type: (List[SymmetryCheck]) -> None
        sys.stdout.write(format_checks(checks))

    def check_equivariance_failed_checkpoint(self, path, message):
        # type: (str, str) -> None
        logging.critical("checkpoint %s: %s", path, message)
        sys.exit(EXIT_FAILURE)

    def check_equivariance_failed_invalid(self, message):
        # type: (str) -> None
        logging.critical("cannot check equivariance: %s", message)
        sys.exit(EXIT_FAILURE)

    def check_equivariance_failed_violations(self, checks):
        # type: (List[SymmetryCheck]) -> None
        sys.stdout.write(format_checks(checks))
        failed = [check.name for check in checks if not check.passed]
        logging.critical("symmetry violated: %s", ", ".join(failed))
        sys.exit(EXIT_FAILURE)

    def run(self, args):
        # type: (Namespace) -> None
        usecase = self.usecase_factory.create_check_equivariance_usecase(self)
        usecase.check_equivariance(args.ckpt, args.trials, args.chain_steps, args.precision)
