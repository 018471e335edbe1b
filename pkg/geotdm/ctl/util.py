import os
from argparse import ArgumentTypeError
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from argparse import Namespace
    from geotdm.settings import Settings
    from typing import Optional


def positive_int(value):
    # type: (str) -> int
    try:
        number = int(value)
    except ValueError:
        raise ArgumentTypeError("{} is not an integer".format(value))
    if number < 1:
        raise ArgumentTypeError("{} is not a positive integer".format(value))
    return number


def non_negative_int(value):
    # type: (str) -> int
    try:
        number = int(value)
    except ValueError:
        raise ArgumentTypeError("{} is not an integer".format(value))
    if number < 0:
        raise ArgumentTypeError("{} is negative".format(value))
    return number


def output_path(settings, name):
    # type: (Settings, str) -> str
    """Place a relative artifact name in the output directory."""
    return os.path.join(settings.output_dir, name)


def checkpoint_path(settings, args):
    # type: (Settings, Namespace) -> str
    """The --ckpt argument, or the configured checkpoint placed in --out when that is given."""
    if args.ckpt:
        return args.ckpt
    if args.out:
        return output_path(settings, os.path.basename(settings.checkpoint_path))
    return settings.checkpoint_path


def csv_path(path, export):
    # type: (str, Optional[str]) -> Optional[str]
    if export != "csv":
        return None
    return os.path.splitext(path)[0] + ".csv"
