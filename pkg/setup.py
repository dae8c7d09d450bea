#!/usr/bin/env python
from setuptools import setup

CLASSIFIERS = [
    'Development Status :: 3 - Alpha',
    'Environment :: Console',
    'Intended Audience :: Science/Research',
    'Operating System :: POSIX',
    'Programming Language :: Python',
    'Programming Language :: Python :: 3',
    'Topic :: Scientific/Engineering :: Mathematics',
]

setup(
    name='cheeger-lab',
    description='Weighted p-Laplacian eigenvalues and weighted Cheeger '
                'constants on grids',
    version='0.1.0',
    platforms=CLASSIFIERS,
    install_requires=[
        'argcomplete',
        'reprint',
        'pyyaml',
        'numpy',
        'scipy',
        'networkx',
        'sympy',
        'matplotlib',
    ],
    tests_require=[
        'pytest',
        'mock',
        'hypothesis',
    ],
    entry_points={'console_scripts': [
        'cheeger-lab = cheeger_lab.lab:main',
    ]},
    packages=['cheeger_lab'],
    include_package_data=False,
    zip_safe=False,
    test_suite='tests',
    python_requires='>=3.8',
)
