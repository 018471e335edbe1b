from geotdm.version import __version__  # noqa: F401
