"""
Module for validating eigendecompositions.

This module provides checker classes that verify the contracts a Spectrum
must satisfy against the matrix it was computed from: ordering,
orthonormality, residual bound, sign gauge and trace preservation.

"""

from typing import Dict

import numpy as np

from .eigensolver import Spectrum
from .lattice import TridiagonalMatrix


class SpectrumChecker:
    """Base class for spectrum checkers."""

    name = "base"

    def check(self, spectrum: Spectrum, matrix: TridiagonalMatrix) -> bool:
        """
        Checks if the spectrum meets one contract.

        Args:
            spectrum (Spectrum): The eigendecomposition to check.
            matrix (TridiagonalMatrix): The matrix it was computed from.

        Raises:
            NotImplementedError: This method should be overridden.

        Returns:
            bool: True if the spectrum passes the check, False otherwise.
        """
        raise NotImplementedError("This method should be overridden by subclass")


class OrderingChecker(SpectrumChecker):
    """Checker for ascending eigenvalues."""

    name = "ordering"

    def check(self, spectrum, matrix):
        return bool(np.all(np.diff(spectrum.energies) >= 0))


class OrthonormalityChecker(SpectrumChecker):
    """Checker for normalized, pairwise orthogonal eigenvectors."""

    name = "orthonormality"

    def __init__(self, norm_tol=1e-12, overlap_tol=1e-10):
        self.norm_tol = norm_tol
        self.overlap_tol = overlap_tol

    def check(self, spectrum, matrix):
        gram = spectrum.states.T @ spectrum.states
        norms_ok = np.all(np.abs(np.diag(gram) - 1.0) <= self.norm_tol)
        off_diagonal = gram - np.diag(np.diag(gram))
        return bool(norms_ok and np.all(np.abs(off_diagonal) <= self.overlap_tol))


class ResidualChecker(SpectrumChecker):
    """Checker for ||H v - E v|| <= tol * max(1, |E|)."""

    name = "residual"

    def __init__(self, tol=1e-10):
        self.tol = tol

    def check(self, spectrum, matrix):
        residuals = matrix.matvec(spectrum.states) - spectrum.states * spectrum.energies
        bounds = self.tol * np.maximum(1.0, np.abs(spectrum.energies))
        return bool(np.all(np.linalg.norm(residuals, axis=0) <= bounds))


class GaugeChecker(SpectrumChecker):
    """Checker for the sign gauge (largest-magnitude entry positive)."""

    name = "gauge"

    def check(self, spectrum, matrix):
        pivots = np.argmax(np.abs(spectrum.states), axis=0)
        return bool(np.all(spectrum.states[pivots, np.arange(spectrum.count)] > 0))


class TraceChecker(SpectrumChecker):
    """Checker for trace preservation; only meaningful for a full spectrum."""

    name = "trace"

    def check(self, spectrum, matrix):
        if spectrum.count != matrix.size:
            return True
        tol = 1e-9 * matrix.size * max(1.0, matrix.norm())
        return bool(abs(spectrum.energies.sum() - matrix.diag.sum()) <= tol)


class SpectrumCheckFactory:
    """
    Factory class for creating spectrum checkers.
    """

    _checkers = {
        "ordering": OrderingChecker,
        "orthonormality": OrthonormalityChecker,
        "residual": ResidualChecker,
        "gauge": GaugeChecker,
        "trace": TraceChecker,
    }

    @classmethod
    def available(cls):
        return tuple(cls._checkers)

    @classmethod
    def create_checker(cls, checker_type):  # Factory method
        """
        Creates the spectrum checker object.

        Args:
            checker_type (str): Type of checker to create, one of
                'ordering', 'orthonormality', 'residual', 'gauge', 'trace'.

        Returns:
            SpectrumChecker: Instance of the checker class.

        Raises:
            ValueError: If unsupported checker type is specified.
        """
        try:
            return cls._checkers[checker_type]()
        except KeyError:
            raise ValueError(f"Unsupported checker type: {checker_type}") from None


def run_all_checks(spectrum: Spectrum, matrix: TridiagonalMatrix) -> Dict[str, bool]:
    """Run every registered checker and report the outcome per check."""
    return {
        name: SpectrumCheckFactory.create_checker(name).check(spectrum, matrix)
        for name in SpectrumCheckFactory.available()
    }
