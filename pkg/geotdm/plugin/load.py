import inspect
import logging
import os
from importlib import import_module
from typing import TYPE_CHECKING

from annex import Annex

from geotdm.plugin.exceptions import PluginsDirectoryDoesNotExist

if TYPE_CHECKING:
    from typing import Callable, List, Type, TypeVar

    T = TypeVar("T")

logger = logging.getLogger(__name__)


def load_plugins(base_plugin, plugin_dirs, plugin_module_paths, service_name):
    # type: (Type[T], List[str], List[str], str) -> List[T]
    """Instantiate every plugin found in plugin_dirs or the modules in plugin_module_paths.

    Each plugin is configured with service_name before it is returned.
    """
    missing = [d for d in plugin_dirs if not os.path.isdir(d)]
    if missing:
        raise PluginsDirectoryDoesNotExist("{} doesn't exist".format(", ".join(missing)))

    plugins = Annex(
        base_plugin=base_plugin,
        plugin_dirs=plugin_dirs,
        raise_exceptions=True,
        additional_plugin_callback=_plugin_classes_in_modules(base_plugin, plugin_module_paths),
    )

    loaded = []
    for plugin in plugins:
        plugin.configure(service_name)
        logger.debug("loaded plugin %s", type(plugin).__name__)
        loaded.append(plugin)
    return loaded


def _plugin_classes_in_modules(base_plugin, plugin_module_paths):
    # type: (Type[T], List[str]) -> Callable
    def callback():
        classes = []
        for module_path in plugin_module_paths:
            module = import_module(module_path)
            for _, obj in inspect.getmembers(module, inspect.isclass):
                if issubclass(obj, base_plugin) and obj is not base_plugin and obj not in classes:
                    classes.append(obj)
        return classes

    return callback
