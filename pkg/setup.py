#!/usr/bin/env python

from setuptools import find_packages
from setuptools import setup

setup(name = 'alpha_discovery',
      description = 'Construct and compare cross-sectional alpha features '
                    'with genetic programming and correlation-trained networks',
      author = 'alpha_discovery contributors',
      packages = find_packages(exclude=['tests']),
      install_requires = ['numpy', 'pandas>=1.5', 'scipy', 'scikit-learn'],
      extras_require = {'tests': ['pytest']},
      entry_points = {'console_scripts': [
          'alpha-discovery = alpha_discovery.Alpha_Discovery_CLI:main']}
    )
