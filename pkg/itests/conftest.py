"""Provide pytest fixtures for the integration tests.

The setup fixture is the same one the unit tests use, closed after each test so the global plugin
proxy it installs does not leak into the next one.
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
