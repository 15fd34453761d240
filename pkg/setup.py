import sys
from setuptools import setup, find_packages

# Check Python version
python_version = sys.version_info
if python_version < (3, 9):
    sys.exit("""
Error: This package requires Python 3.9 or newer.
You are using Python {}.{}.{}.

To install a recent Python, you can do one of the following:

1. From Python's official site:
    - Download the installer from https://www.python.org/downloads/
    - Follow the installation instructions.

2. Using package manager (Ubuntu example):
    $ sudo apt update
    $ sudo apt install python3.11

After installing the correct Python version, try running pip install again.
""".format(*python_version))

# Setup configuration
setup(
    name="aas-lab",
    version="1.0.0",
    description="Ground-state localization, critical scaling and QFI of the Aubry-Andre-Stark chain",
    packages=find_packages(exclude=("tests",)),
    install_requires=[
        "numpy>=1.22",
        "scipy>=1.9",
        "pandas>=1.5",
        "joblib>=1.2",
    ],
    extras_require={
        "test": ["pytest>=7.4", "pytest-mock>=3.11"],
    },
    entry_points={
        'console_scripts': [
            'aas_lab=aas_lab.cli:main',
        ],
    },
    python_requires='>=3.9'
)
