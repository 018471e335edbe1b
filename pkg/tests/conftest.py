"""Provide pytest fixtures for test setup.

Use cases read and write real files, so every test that runs them gets a temporary directory and
settings pointing into it.  The setup fixture also swaps in a global plugin proxy that records
stats and restores the previous one afterwards.

This file is automatically loaded by pytest and injects available fixtures into every test without
requiring the flake8 noqa annotations normally needed by explicit fixture imports.
"""

from contextlib import closing
from typing import TYPE_CHECKING

import pytest

from tests.setup import SetupTest

if TYPE_CHECKING:
    from py.path import LocalPath
    from typing import Iterator


@pytest.fixture
def setup(tmpdir):
    # type: (LocalPath) -> Iterator[SetupTest]
    with closing(SetupTest(tmpdir)) as test_setup:
        yield test_setup
