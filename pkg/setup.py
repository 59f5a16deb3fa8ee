#!/usr/bin/env python3

from setuptools import find_packages, setup

import ionmotion

setup(
    name="ionmotion",
    version=ionmotion.__version__,
    description="Cooling, heating and sideband thermometry of a trapped ion's motion",
    long_description=(
        "Simulate the motional state of a single trapped ion.\nionmotion "
        "models Doppler and Raman sideband cooling, heating by electric field "
        "noise and sideband-asymmetry thermometry in a truncated Fock space, "
        "and runs the analysis chain from n̄(t) series to heating rates, "
        "frequency and distance power laws and the inferred noise spectral "
        "density of a trap."
    ),
    license="GPL3+",
    install_requires=[
        "pyyaml",
        "numpy",
        "scipy",
    ],
    extras_require={
        "tests": [
            "pytest",
        ],
    },
    packages=find_packages(exclude=["tests*"]),
    entry_points={
        "console_scripts": [
            "ionmotion = ionmotion.commands.ionmotion:main",
        ],
    },
    data_files=[
        (
            "/etc/",
            [
                "etc/ionmotion.yaml",
            ],
        ),
        (
            "share/ionmotion/",
            [
                "etc/cd111_linear.yaml",
                "etc/survey_template.csv",
            ],
        ),
    ],
    platforms=[
        "Linux",
    ],
    classifiers=[
        (
            "License :: OSI Approved :: "
            "GNU General Public License v3 or later (GPLv3+)"
        ),
        "Environment :: Console",
        "Intended Audience :: Science/Research",
        "Programming Language :: Python",
        "Topic :: Scientific/Engineering :: Physics",
    ],
)
