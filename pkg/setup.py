#!/usr/bin/env python
# -*- coding: utf-8 -*-

import re
from pathlib import Path

from setuptools import setup


def get_version(package):
    """
    Return package version as listed in `__version__.py`.
    """
    version = Path(package, "__version__.py").read_text()
    return re.search("__version__ = ['\"]([^'\"]+)['\"]", version).group(1)


def get_long_description():
    """
    Return the README.
    """
    long_description = ""
    with open("README.md", encoding="utf8") as f:
        long_description += f.read()
    # long_description += "\n\n"
    # with open("CHANGELOG.md", encoding="utf8") as f:
    #     long_description += f.read()
    return long_description


def get_packages(package):
    """
    Return root package and all sub-packages.
    """
    return [str(path.parent) for path in Path(package).glob("**/__init__.py")]


setup(
    name="greybox-gp",
    python_requires=">=3.9",
    version=get_version("greybox_gp"),
    license="Apache-2.0",
    description="Physics-informed Gaussian process regression, from white-box to black-box priors.",
    long_description=get_long_description(),
    long_description_content_type="text/markdown",
    package_data={"greybox_gp": ["py.typed"]},
    packages=get_packages("greybox_gp"),
    include_package_data=True,
    zip_safe=False,
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "msgpack",
        "anyio>=3.6",
        "multimethod",
    ],
    extras_require={},
    entry_points={"console_scripts": ["greybox-gp=greybox_gp._cli:main"]},
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Operating System :: OS Independent",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Topic :: Scientific/Engineering :: Physics",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Programming Language :: Python :: 3.11",
        "Programming Language :: Python :: 3.12",
        "Programming Language :: Python :: 3 :: Only",
    ],
)
