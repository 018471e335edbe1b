from typing import TYPE_CHECKING

from geotdm.ctl.check_equivariance import CheckEquivarianceCommand
from geotdm.ctl.evaluate import EvaluateCommand
from geotdm.ctl.generate import (
    ComposeCommand,
    ForecastCommand,
    InterpolateCommand,
    RefineCommand,
    SampleCommand,
)
from geotdm.ctl.simulate import SimulateCommand
from geotdm.ctl.train import TrainCommand

if TYPE_CHECKING:
    from argparse import _SubParsersAction
    from geotdm.ctl.base import CtlCommand
    from geotdm.settings import Settings
    from geotdm.usecases.factory import UseCaseFactory


class UnknownCommand(Exception):
    """Attempted to run a command with no known class."""

    pass


class CtlCommandFactory(object):
    """Construct and add parsers for geotdm-ctl commands."""

    @staticmethod
    def add_all_parsers(subparsers):
        # type: (_SubParsersAction) -> None
        """Initialize parsers for all geotdm-ctl commands.

        This is a static method since it has to be called before command-line parsing, but
        constructing a CtlCommandFactory requires a UseCaseFactory, which in turn requires the
        settings that the command line may override.
        """
        parser = subparsers.add_parser("simulate", help="Simulate an N-body dataset")
        SimulateCommand.add_arguments(parser)
        parser = subparsers.add_parser("train", help="Train a diffusion model")
        TrainCommand.add_arguments(parser)
        parser = subparsers.add_parser("sample", help="Sample from an unconditional model")
        SampleCommand.add_arguments(parser)
        parser = subparsers.add_parser("forecast", help="Forecast with a conditional model")
        ForecastCommand.add_arguments(parser)
        parser = subparsers.add_parser("interpolate", help="Interpolate with a conditional model")
        InterpolateCommand.add_arguments(parser)
        parser = subparsers.add_parser("refine", help="Refine rough trajectories")
        RefineCommand.add_arguments(parser)
        parser = subparsers.add_parser("compose", help="Chain segments into long trajectories")
        ComposeCommand.add_arguments(parser)
        parser = subparsers.add_parser("evaluate", help="Score generated trajectories")
        EvaluateCommand.add_arguments(parser)
        parser = subparsers.add_parser("check-equivariance", help="Run the symmetry checks")
        CheckEquivarianceCommand.add_arguments(parser)

    def __init__(self, settings, usecase_factory):
        # type: (Settings, UseCaseFactory) -> None
        self.settings = settings
        self.usecase_factory = usecase_factory

    def construct_command(self, command):
        # type: (str) -> CtlCommand
        if command == "simulate":
            return SimulateCommand(self.settings, self.usecase_factory)
        elif command == "train":
            return TrainCommand(self.settings, self.usecase_factory)
        elif command == "sample":
            return SampleCommand(self.settings, self.usecase_factory)
        elif command == "forecast":
            return ForecastCommand(self.settings, self.usecase_factory)
        elif command == "interpolate":
            return InterpolateCommand(self.settings, self.usecase_factory)
        elif command == "refine":
            return RefineCommand(self.settings, self.usecase_factory)
        elif command == "compose":
            return ComposeCommand(self.settings, self.usecase_factory)
        elif command == "evaluate":
            return EvaluateCommand(self.settings, self.usecase_factory)
        elif command == "check-equivariance":
            return CheckEquivarianceCommand(self.usecase_factory)
        else:
            raise UnknownCommand("unknown command {}".format(command))
