"""Utilities to set up integration tests.

Contains only test setup code specific to integration tests, such as running geotdm-ctl as a
separate process and scaling the toy test settings up to something that learns.  More general
test setup code goes in tests.setup.
"""

import logging
import subprocess
import sys
from typing import TYPE_CHECKING

from tests.path_util import bin_env

if TYPE_CHECKING:
    from subprocess import CompletedProcess
    from tests.setup import SetupTest


def geotdm_ctl(config, *args):
    # type: (str, *str) -> CompletedProcess
    """Run geotdm-ctl in a subprocess with the given configuration and return the result."""
    cmd = [sys.executable, "-m", "geotdm.ctl.main", "-c", config] + list(args)
    logging.info("Running command: %s", " ".join(cmd))
    return subprocess.run(cmd, env=bin_env(), capture_output=True, text=True, timeout=600)


def scale_up(setup, n_train=64, max_epochs=30):
    # type: (SetupTest, int, int) -> None
    """Grow the dataset, model and training budget enough for training to make real progress."""
    settings = setup.settings
    settings.dataset = settings.dataset._replace(n_train=n_train, n_valid=16, n_test=32)
    settings.model = settings.model._replace(n_layers=2, hidden_dim=32, time_emb_dim=8)
    settings.schedule = settings.schedule._replace(n_steps=50)
    settings.train = settings.train._replace(
        learning_rate=3e-3,
        batch_size=16,
        max_epochs=max_epochs,
        validation_interval=5,
        early_stop_patience=max_epochs,
    )
