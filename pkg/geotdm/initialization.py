"""Setup functions common to all geotdm front ends."""

from typing import TYPE_CHECKING

from geotdm.repositories.factory import RepositoryFactory
from geotdm.usecases.factory import UseCaseFactory

if TYPE_CHECKING:
    from geotdm.plugin.proxy import PluginProxy
    from geotdm.settings import Settings
    from typing import Optional


def create_usecase_factory(settings, plugins, repository_factory=None):
    # type: (Settings, PluginProxy, Optional[RepositoryFactory]) -> UseCaseFactory
    """Create a file-backed UseCaseFactory, with optional injection of the repository factory.

    Repository factory injection is supported primarily for tests.
    """
    if not repository_factory:
        repository_factory = RepositoryFactory(settings)
    return UseCaseFactory(settings, plugins, repository_factory)
