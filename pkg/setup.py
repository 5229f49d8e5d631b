from codecs import open
import os
import os.path

from setuptools import (
    find_packages,
    setup,
)

here = os.path.relpath(os.path.abspath(os.path.dirname(__file__)))

with open(os.path.join(here, 'README.rst'), encoding='utf-8') as fd:
    long_description = fd.read()

__version__ = '0.3.0'

setup(
    name='pincer',
    version=__version__,
    description='Pincer - grasp pose detection in point clouds',
    long_description=long_description,
    license="Apache 2.0",
    classifiers=[
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3 :: Only",
        "Programming Language :: Python :: Implementation :: CPython",
        "Topic :: Scientific/Engineering",
    ],
    keywords="robotics grasping point clouds svm",
    packages=find_packages(),
    include_package_data=True,
    zip_safe=False,
    python_requires='>=3.8',
    install_requires=[
        'billiard',
        'colander',
        'datadog<0.49',
        'numpy',
        'raven',
        'repoze.lru',
        'scipy',
        'simplejson',
    ],
    extras_require={
        'test': [
            'factory_boy',
            'pytest',
        ],
    },
    entry_points={
        'console_scripts': [
            'pincer=pincer.scripts.main:console_entry',
        ],
    },
)
