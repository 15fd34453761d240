"""
eigensolver.py

Eigendecomposition of real symmetric tridiagonal matrices.

Two LAPACK paths are exposed through SciPy: the implicit-shift QL/QR
iteration (?stev) for the full spectrum, and bisection plus inverse
iteration (?stebz + ?stein) for the lowest k eigenpairs. A dense
divide-and-conquer solve of the same matrix serves as an independent oracle
for small sizes.

Every returned Spectrum uses the same sign gauge: the entry of largest
magnitude in each eigenvector is positive (lowest index wins on ties).
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import EigensolverError
from .lattice import TridiagonalMatrix

DENSE_ORACLE_MAX_SIZE = 64


@dataclass(frozen=True)
class Spectrum:
    """Ordered eigenpairs of one Hamiltonian instance.

    Attributes:
        energies (np.ndarray): Ascending eigenvalues, shape (k,).
        states (np.ndarray): Orthonormal eigenvectors as columns, shape (L, k);
            column k belongs to energies[k].
    """

    energies: np.ndarray
    states: np.ndarray

    @property
    def size(self) -> int:
        """Number of lattice sites L."""
        return int(self.states.shape[0])

    @property
    def count(self) -> int:
        """Number of eigenpairs held."""
        return int(self.energies.size)

    @property
    def ground_state(self) -> np.ndarray:
        return self.states[:, 0]

    def prefix(self, k: int) -> "Spectrum":
        return Spectrum(energies=self.energies[:k].copy(), states=self.states[:, :k].copy())


def fix_gauge(states: np.ndarray) -> np.ndarray:
    """Flip eigenvector signs so the largest-magnitude entry is positive.

    Args:
        states (np.ndarray): Eigenvectors as columns.

    Returns:
        np.ndarray: A gauge-fixed copy.
    """
    states = np.array(states, dtype=np.float64, copy=True)
    if states.size == 0:
        return states
    # argmax returns the first maximum, so the lowest index wins ties
    pivots = np.argmax(np.abs(states), axis=0)
    signs = np.sign(states[pivots, np.arange(states.shape[1])])
    signs[signs == 0] = 1.0
    return states * signs


def _sorted_spectrum(energies: np.ndarray, states: np.ndarray) -> Spectrum:
    order = np.argsort(energies, kind="stable")
    energies = np.ascontiguousarray(energies[order], dtype=np.float64)
    states = fix_gauge(states[:, order])
    return Spectrum(energies=energies, states=states)


def eigh_tridiagonal(matrix: TridiagonalMatrix) -> Spectrum:
    """Full eigendecomposition by implicit-shift QL/QR.

    Args:
        matrix (TridiagonalMatrix): The matrix to decompose.

    Returns:
        Spectrum: All L eigenpairs, ascending.

    Raises:
        EigensolverError: If the iteration does not converge; the error
            carries the index LAPACK reported.
    """
    if matrix.size == 1:
        return Spectrum(energies=matrix.diag.copy(), states=np.ones((1, 1)))
    stev, = linalg.get_lapack_funcs(("stev",), (matrix.diag, matrix.offdiag))
    energies, states, info = stev(matrix.diag, matrix.offdiag, compute_v=1)
    if info > 0:
        raise EigensolverError(
            f"QL/QR iteration failed to converge: {info} off-diagonal elements did not reach zero "
            f"(first unconverged index {info})",
            index=int(info),
        )
    if info < 0:
        raise EigensolverError(f"Illegal value in argument {-info} of ?stev", index=int(-info))
    return _sorted_spectrum(energies, states)


def lowest_k(matrix: TridiagonalMatrix, k: int) -> Spectrum:
    """Compute the k lowest eigenpairs by bisection and inverse iteration.

    Inverse iteration (?stein) reorthogonalizes eigenvectors inside clusters
    of close eigenvalues.

    Args:
        matrix (TridiagonalMatrix): The matrix to decompose.
        k (int): Number of eigenpairs, 1 <= k <= L.

    Returns:
        Spectrum: The k lowest eigenpairs, ascending.

    Raises:
        ValueError: If k is out of range.
        EigensolverError: If bisection or inverse iteration fails.
    """
    if not 1 <= k <= matrix.size:
        raise ValueError(f"k must lie in [1, {matrix.size}], got {k}")
    if k == matrix.size:
        return eigh_tridiagonal(matrix)
    try:
        energies, states = linalg.eigh_tridiagonal(
            matrix.diag,
            matrix.offdiag,
            select="i",
            select_range=(0, k - 1),
            lapack_driver="stebz",
        )
    except linalg.LinAlgError as error:
        raise EigensolverError(f"Bisection/inverse iteration failed for eigenpairs 0..{k - 1}: {error}",
                               index=k - 1) from error
    return _sorted_spectrum(energies, states)


def dense_oracle(matrix: TridiagonalMatrix) -> Spectrum:
    """Independent eigendecomposition of the dense matrix for cross-checks.

    Args:
        matrix (TridiagonalMatrix): The matrix to decompose, L <= 64.

    Returns:
        Spectrum: All eigenpairs, in the same gauge as the tridiagonal paths.

    Raises:
        ValueError: If the matrix is larger than the test-scale guard.
    """
    if matrix.size > DENSE_ORACLE_MAX_SIZE:
        raise ValueError(f"dense_oracle is limited to L <= {DENSE_ORACLE_MAX_SIZE}, got L={matrix.size}")
    energies, states = np.linalg.eigh(matrix.to_dense())
    return _sorted_spectrum(energies, states)
