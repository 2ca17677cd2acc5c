#!/usr/bin/env python3

from blipsim import __version__
from setuptools import setup, find_packages

with open("README.md", "r") as f:
    readme = f.read()

setup(
    name="blipsim",
    version=__version__,
    description="Bernoulli longest increasing paths, last passage percolation and their particle processes",
    long_description=readme,
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=["tests"]),
    install_requires=[
        "cerberus>=1.3.5,<=1.3.8",
        "pyyaml>=6.0.1,<=6.0.3",
        "numpy>=1.24",
        "numba>=0.58",
        "scipy>=1.10"
    ],
    extras_require={
        "tests": [
            "pytest>=7.0"
        ]
    },
    entry_points={
        "console_scripts": [
            "blipsim=blipsim.cli:main"
        ]
    },
    python_requires=">=3.9"
)
