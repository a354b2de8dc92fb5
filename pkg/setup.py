#!/usr/bin/env python3
'''
Setup script for permlab.
Installs the package and the `perm` command.
'''

from pathlib import Path

from setuptools import find_packages, setup

SCRIPT_DIR = Path(__file__).resolve().parent


def read_requirements(name: str) -> list[str]:
    '''Requirement lines from a requirements file, comments dropped'''
    lines = (SCRIPT_DIR / name).read_text().splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith('#')]


setup(
    name='permlab',
    version='0.1.0',
    description='Permanent estimation by analytic continuation, with exact oracles and Monte Carlo checks',
    packages=find_packages(exclude=['tests']),
    package_data={'permlab': ['configs/*.cfg']},
    python_requires='>=3.10',
    install_requires=read_requirements('requirements.txt'),
    extras_require={'test': read_requirements('requirements-test.txt')},
    entry_points={'console_scripts': ['perm=permlab.runner:main']},
)
