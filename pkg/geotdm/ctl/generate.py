import logging
import sys
from typing import TYPE_CHECKING

from geotdm.constants import SPLITS
from geotdm.ctl.base import CtlCommand, EXIT_FAILURE
from geotdm.ctl.util import checkpoint_path, csv_path, non_negative_int, output_path, positive_int
from geotdm.usecases.generate_trajectories import GenerateTrajectoriesUI

if TYPE_CHECKING:
    from argparse import ArgumentParser, Namespace
    from geotdm.entities.sample_set import SampleSetMetadata
    from geotdm.settings import Settings
    from geotdm.usecases.factory import UseCaseFactory
    from geotdm.usecases.generate_trajectories import GenerateTrajectories
    from typing import Optional, Tuple


def _add_common_arguments(parser, name, with_k=True):
    # type: (ArgumentParser, str, bool) -> None
    parser.add_argument("--ckpt", default=None, help="Checkpoint of the model to generate with.")
    parser.add_argument(
        "--split", choices=SPLITS, default="test", help="Dataset split to take graphs from."
    )
    parser.add_argument(
        "--count", type=positive_int, default=None, help="Number of trajectories to generate."
    )
    if with_k:
        parser.add_argument(
            "-k", type=positive_int, default=1, help="Samples to draw per trajectory."
        )
    parser.add_argument(
        "--name",
        default="{}.gtrj".format(name),
        help="File name of the output, inside the output directory.",
    )
    parser.add_argument(
        "--export", choices=["csv"], default=None, help="Also export the trajectories as CSV."
    )


class GenerateCommand(CtlCommand, GenerateTrajectoriesUI):
    """Shared front end of the commands that write generated trajectories."""

    def __init__(self, settings, usecase_factory):
        # type: (Settings, UseCaseFactory) -> None
        self.settings = settings
        self.usecase_factory = usecase_factory

    def generated_trajectories(self, path, metadata):
        # type: (str, SampleSetMetadata) -> None
        logging.info(
            "wrote %d x %d %s trajectories of %d frames to %s",
            metadata.n_trajectories,
            metadata.samples_per_trajectory,
            metadata.generation.value,
            metadata.n_frames,
            path,
        )

    def generate_trajectories_failed_checkpoint(self, path, message):
        # type: (str, str) -> None
        logging.critical("checkpoint %s: %s", path, message)
        sys.exit(EXIT_FAILURE)

    def generate_trajectories_failed_dataset(self, directory, message):
        # type: (str, str) -> None
        logging.critical("cannot read %s: %s", directory, message)
        sys.exit(EXIT_FAILURE)

    def generate_trajectories_failed_invalid(self, message):
        # type: (str) -> None
        logging.critical("cannot generate: %s", message)
        sys.exit(EXIT_FAILURE)

    def generate_trajectories_failed_io(self, path, message):
        # type: (str, str) -> None
        logging.critical("cannot write %s: %s", path, message)
        sys.exit(EXIT_FAILURE)

    def usecase(self):
        # type: () -> GenerateTrajectories
        return self.usecase_factory.create_generate_trajectories_usecase(self)

    def paths(self, args):
        # type: (Namespace) -> Tuple[str, Optional[str]]
        path = output_path(self.settings, args.name)
        return path, csv_path(path, args.export)


class SampleCommand(GenerateCommand):
    """Command to draw trajectories from an unconditional model."""

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        _add_common_arguments(parser, "sample", with_k=False)

    def run(self, args):
        # type: (Namespace) -> None
        path, export = self.paths(args)
        self.usecase().sample(
            checkpoint_path(self.settings, args), path, args.split, args.count, export
        )


class ForecastCommand(GenerateCommand):
    """Command to forecast trajectories with a conditional model."""

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        _add_common_arguments(parser, "forecast")

    def run(self, args):
        # type: (Namespace) -> None
        path, export = self.paths(args)
        self.usecase().forecast(
            checkpoint_path(self.settings, args), path, args.split, args.count, args.k, export
        )


class InterpolateCommand(GenerateCommand):
    """Command to fill in the middle of trajectories with a conditional model."""

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        _add_common_arguments(parser, "interpolate")

    def run(self, args):
        # type: (Namespace) -> None
        path, export = self.paths(args)
        self.usecase().interpolate(
            checkpoint_path(self.settings, args), path, args.split, args.count, args.k, export
        )


class RefineCommand(GenerateCommand):
    """Command to refine rough trajectories with a few steps of a conditional model."""

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        _add_common_arguments(parser, "refine")
        parser.add_argument(
            "--k-steps",
            type=non_negative_int,
            required=True,
            help="Diffusion steps to noise and then denoise the rough trajectories.",
        )
        parser.add_argument(
            "--init",
            default=None,
            help="Generated trajectories to refine (default: a baseline of the model's task).",
        )

    def run(self, args):
        # type: (Namespace) -> None
        path, export = self.paths(args)
        self.usecase().refine(
            checkpoint_path(self.settings, args),
            path,
            args.k_steps,
            args.split,
            args.count,
            args.k,
            args.init,
            export,
        )


class ComposeCommand(GenerateCommand):
    """Command to chain segment models into long trajectories."""

    @staticmethod
    def add_arguments(parser):
        # type: (ArgumentParser) -> None
        _add_common_arguments(parser, "compose", with_k=False)
        parser.add_argument(
            "--segments", type=positive_int, default=2, help="Number of segments to chain."
        )
        parser.add_argument(
            "--uncond-ckpt",
            default=None,
            help="Unconditional model for the first segment (default: dataset target windows).",
        )

    def run(self, args):
        # type: (Namespace) -> None
        path, export = self.paths(args)
        self.usecase().compose(
            checkpoint_path(self.settings, args),
            path,
            args.segments,
            args.uncond_ckpt,
            args.split,
            args.count,
            export,
        )
