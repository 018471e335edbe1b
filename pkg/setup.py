#!/usr/bin/env python3

import os
from collections import defaultdict

from setuptools import setup

try:
    from typing import Dict, List
except Exception:
    pass

# this defines __version__ for use below without assuming geotdm is in the
# path or importable during build
with open("geotdm/version.py", "r") as version:
    code = compile(version.read(), "geotdm/version.py", "exec")
    exec(code)

# Installation requirements.
with open("requirements.txt") as requirements:
    required = requirements.read().splitlines()

# Test suite requirements.
with open("requirements-dev.txt") as requirements:
    test_required = requirements.read().splitlines()

package_data = defaultdict(list)  # type: Dict[str, List]


def get_package_data(package, base_dir):
    for dirpath, dirnames, filenames in os.walk(base_dir):
        dirpath = dirpath[len(package) + 1 :]  # Strip package dir
        for filename in filenames:
            package_data[package].append(os.path.join(dirpath, filename))
        for dirname in dirnames:
            get_package_data(package, dirname)


get_package_data("geotdm", "geotdm/templates")

kwargs = {
    "name": "geotdm",
    "version": __version__,  # type: ignore  # noqa: F821
    "packages": [
        "geotdm",
        "geotdm.ctl",
        "geotdm.diffusion",
        "geotdm.egtn",
        "geotdm.entities",
        "geotdm.plugin",
        "geotdm.repositories",
        "geotdm.usecases",
    ],
    "package_data": package_data,
    "entry_points": {"console_scripts": ["geotdm-ctl = geotdm.ctl.main:main"]},
    "description": "Equivariant diffusion models of geometric trajectories.",
    "long_description": open("README.rst").read(),
    "license": "Apache",
    "install_requires": required,
    "tests_require": test_required,
    "python_requires": ">=3.9",
    "classifiers": [
        "Programming Language :: Python :: 3.9",
        "Topic :: Scientific/Engineering",
        "Topic :: Scientific/Engineering :: Artificial Intelligence",
        "Topic :: Scientific/Engineering :: Physics",
    ],
}

setup(**kwargs)
