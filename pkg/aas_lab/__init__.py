"""Aubry-André-Stark localization lab."""

__version__ = "1.0.0"

from .lattice import ModelParams, SweepPoint, build_hamiltonian, fibonacci  # noqa: E402
from .eigensolver import Spectrum, eigh_tridiagonal, lowest_k  # noqa: E402
from .observables import observe  # noqa: E402
