from typing import TYPE_CHECKING

import yaml

from geotdm.ctl.main import main

if TYPE_CHECKING:
    from tests.setup import SetupTest


def write_config(setup):
    # type: (SetupTest) -> str
    """Write the test settings, with their temporary paths, to a config file for geotdm-ctl."""
    path = setup.path("geotdm.yaml")
    with open(path, "w") as config:
        yaml.safe_dump(setup.settings.as_dict(), config, default_flow_style=False)
    return path


def run_ctl(setup, *args):
    # type: (SetupTest, *str) -> None
    argv = ["geotdm-ctl", "-c", write_config(setup)] + list(args)
    main(sys_argv=argv, repository_factory=setup.repository_factory)
