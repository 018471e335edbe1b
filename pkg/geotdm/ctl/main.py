import argparse
import logging
import os
import sys
from typing import TYPE_CHECKING

from geotdm import __version__, stats
from geotdm.ctl.base import EXIT_FAILURE, EXIT_USAGE
from geotdm.ctl.factory import CtlCommandFactory
from geotdm.initialization import create_usecase_factory
from geotdm.plugin import set_global_plugin_proxy
from geotdm.plugin.exceptions import PluginsDirectoryDoesNotExist
from geotdm.plugin.proxy import PluginProxy
from geotdm.settings import default_settings_path, InvalidSettingsError, Settings
from geotdm.util import get_loglevel

if TYPE_CHECKING:
    from argparse import Namespace
    from geotdm.repositories.factory import RepositoryFactory
    from typing import List, Optional


class CtlArgumentParser(argparse.ArgumentParser):
    """Argument parser that exits with EXIT_USAGE on malformed command lines."""

    def error(self, message):
        # type: (str) -> None
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, "{}: error: {}\n".format(self.prog, message))


def build_parser():
    # type: () -> CtlArgumentParser
    parser = CtlArgumentParser(description="GeoTDM Control")
    parser.add_argument(
        "-c",
        "--config",
        default=None,
        help="Path to config file (default: $GEOTDM_SETTINGS or geotdm.yaml if present).",
    )
    parser.add_argument(
        "--seed", type=int, default=None, help="Override the run seed in the config."
    )
    parser.add_argument("--out", default=None, help="Directory to write artifacts to.")
    parser.add_argument(
        "-q", "--quiet", action="count", default=0, help="Decrease logging verbosity."
    )
    parser.add_argument(
        "-v", "--verbose", action="count", default=0, help="Increase logging verbosity."
    )
    parser.add_argument(
        "-V",
        "--version",
        action="version",
        version="%%(prog)s %s" % __version__,
        help="Display version information.",
    )

    subparsers = parser.add_subparsers(dest="command")
    subparsers.required = True
    CtlCommandFactory.add_all_parsers(subparsers)
    return parser


def load_settings(args):
    # type: (Namespace) -> Settings
    """Load the config named on the command line and apply the command-line overrides.

    Without -c, the default path is used if it exists and the built-in defaults otherwise.
    """
    path = args.config or default_settings_path()
    if args.config or os.path.exists(path):
        settings = Settings.from_config(path)
    else:
        settings = Settings()
    if args.seed is not None:
        settings.override_seed(args.seed)
    if args.out:
        settings.output_dir = args.out
    return settings


def main(sys_argv=sys.argv, repository_factory=None):
    # type: (List[str], Optional[RepositoryFactory]) -> None
    parser = build_parser()
    args = parser.parse_args(sys_argv[1:])

    log_level = get_loglevel(args, base=logging.INFO)
    try:
        settings = load_settings(args)
    except InvalidSettingsError as e:
        logging.basicConfig(level=log_level)
        logging.critical("invalid configuration: %s", e)
        sys.exit(EXIT_USAGE)
    logging.basicConfig(level=log_level, format=settings.log_format)

    # Initialize plugins.  The global plugin proxy is used by the stats helpers.
    try:
        plugins = PluginProxy.load_plugins(settings, "geotdm-ctl")
    except PluginsDirectoryDoesNotExist as e:
        logging.fatal("Plugin directory does not exist: {}".format(e))
        sys.exit(EXIT_USAGE)
    set_global_plugin_proxy(plugins)
    stats.set_defaults(args.command)

    usecase_factory = create_usecase_factory(settings, plugins, repository_factory)
    command_factory = CtlCommandFactory(settings, usecase_factory)
    command = command_factory.construct_command(args.command)
    try:
        command.run(args)
    except Exception as e:
        plugins.log_exception(*sys.exc_info())
        logging.critical("%s failed: %s", args.command, e, exc_info=True)
        sys.exit(EXIT_FAILURE)


if __name__ == "__main__":
    main()
