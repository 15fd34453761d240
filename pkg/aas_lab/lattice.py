"""
lattice.py

Builds the Aubry-Andre-Stark (AAS) single-particle Hamiltonian on an open
chain of L sites as a real symmetric tridiagonal matrix.

    H = -J sum_i (|i><i+1| + h.c.)
        + sum_i [h i + (2J + delta) cos(2 pi (i omega + phi))] |i><i|

Sites are labelled i = 1..L. The quasiperiodic frequency defaults to the
Fibonacci approximant F_n / F_{n+1} with L = F_{n+1}.

Typical usage example:
  params = ModelParams(L=144, delta=0.0, h=1e-3, phi=0.25)
  matrix = build_hamiltonian(params)
"""

import math
from dataclasses import dataclass, replace
from fractions import Fraction
from typing import List, Optional

import numpy as np

GOLDEN_RATIO = (math.sqrt(5.0) - 1.0) / 2.0

# F_n must fit a signed 64-bit integer
_INT64_MAX = int(np.iinfo(np.int64).max)


def fibonacci(n: int) -> int:
    """Return the Fibonacci number F_n with F_0 = F_1 = 1.

    Args:
        n (int): Non-negative index.

    Returns:
        int: F_n.

    Raises:
        ValueError: If n is negative.
        OverflowError: If F_n does not fit a signed 64-bit integer.
    """
    if n < 0:
        raise ValueError(f"Fibonacci index must be non-negative, got {n}")
    previous, current = 1, 1
    for _ in range(n - 1):
        previous, current = current, previous + current
        if current > _INT64_MAX:
            raise OverflowError(f"F_{n} exceeds the 64-bit integer range")
    return current


def fibonacci_sizes(max_size: int) -> List[int]:
    """List the admissible system sizes F_{n+1} (n >= 1) up to max_size."""
    sizes = []
    n = 2
    while True:
        value = fibonacci(n)
        if value > max_size:
            return sizes
        sizes.append(value)
        n += 1


def is_fibonacci_size(L: int) -> bool:
    """Return True when L is an admissible Fibonacci system size."""
    return L >= 2 and L in fibonacci_sizes(L)


def rational_frequency(L: int) -> float:
    """Return the Fibonacci approximant F_n / F_{n+1} of the golden ratio.

    Args:
        L (int): System size, must equal F_{n+1} for some n >= 1.

    Returns:
        float: F_n / F_{n+1}, evaluated exactly and converted at the end.

    Raises:
        ValueError: If L is not a Fibonacci number; the message names the
            nearest admissible sizes.
    """
    n = 1
    while True:
        upper = fibonacci(n + 1)
        if upper == L:
            return float(Fraction(fibonacci(n), upper))
        if upper > L:
            lower = fibonacci(n) if n > 1 else None
            nearest = [size for size in (lower, upper) if size is not None and size >= 2]
            raise ValueError(
                f"System size {L} is not a Fibonacci number; "
                f"nearest admissible sizes: {', '.join(str(size) for size in nearest)}"
            )
        n += 1


@dataclass(frozen=True)
class ModelParams:
    """Parameters of one AAS Hamiltonian instance.

    Attributes:
        L (int): Number of lattice sites.
        J (float): Hopping amplitude.
        delta (float): Detuning from AA criticality; the AA amplitude is 2J + delta.
        h (float): Stark field strength.
        omega (float, optional): Modulation frequency. None selects the
            Fibonacci approximant tied to L.
        phi (float): Phase offset, reduced into [0, 1).
    """

    L: int
    J: float = 1.0
    delta: float = 0.0
    h: float = 0.0
    omega: Optional[float] = None
    phi: float = 0.0

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 2:
            raise ValueError(f"L must be an integer >= 2, got {self.L}")
        if not self.J > 0:
            raise ValueError(f"J must be positive, got {self.J}")
        if 2.0 * self.J + self.delta < 0:
            raise ValueError(f"AA amplitude 2J + delta must be non-negative, got {2.0 * self.J + self.delta}")
        if not self.h >= 0:
            raise ValueError(f"Stark field h must be non-negative, got {self.h}")
        if not math.isfinite(self.phi):
            raise ValueError(f"phi must be finite, got {self.phi}")
        object.__setattr__(self, "L", int(self.L))
        phase = float(self.phi) % 1.0
        # tiny negative phases round up to exactly 1.0
        object.__setattr__(self, "phi", 0.0 if phase == 1.0 else phase)

    @property
    def aa_amplitude(self) -> float:
        return 2.0 * self.J + self.delta

    @property
    def resolved_omega(self) -> float:
        """The modulation frequency actually used for this instance."""
        if self.omega is None:
            return rational_frequency(self.L)
        return float(self.omega)

    def with_field(self, h: float) -> "ModelParams":
        return replace(self, h=h)


@dataclass(frozen=True)
class SweepPoint:
    """One (L, delta, h) grid point before a phase has been drawn."""

    L: int
    delta: float
    h: float
    J: float = 1.0
    omega: Optional[float] = None

    def with_phase(self, phi: float) -> ModelParams:
        return ModelParams(L=self.L, J=self.J, delta=self.delta, h=self.h, omega=self.omega, phi=phi)


@dataclass(frozen=True)
class TridiagonalMatrix:
    """Real symmetric tridiagonal matrix stored as its two diagonals.

    Attributes:
        diag (np.ndarray): Length-L vector of on-site energies.
        offdiag (np.ndarray): Length-(L-1) vector of hopping elements.
    """

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        diag = np.asarray(self.diag, dtype=np.float64)
        offdiag = np.asarray(self.offdiag, dtype=np.float64)
        if diag.ndim != 1 or offdiag.ndim != 1:
            raise ValueError("Diagonals must be one-dimensional")
        if diag.size < 1 or offdiag.size != diag.size - 1:
            raise ValueError(
                f"Inconsistent dimensions: len(diag)={diag.size}, len(offdiag)={offdiag.size}"
            )
        if not (np.all(np.isfinite(diag)) and np.all(np.isfinite(offdiag))):
            raise ValueError("Matrix elements must be finite")
        object.__setattr__(self, "diag", diag)
        object.__setattr__(self, "offdiag", offdiag)

    @property
    def size(self) -> int:
        return int(self.diag.size)

    def norm(self) -> float:
        """Infinity norm (maximal absolute row sum)."""
        rows = np.abs(self.diag).copy()
        rows[:-1] += np.abs(self.offdiag)
        rows[1:] += np.abs(self.offdiag)
        return float(rows.max())

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def matvec(self, vectors: np.ndarray) -> np.ndarray:
        """Multiply the matrix with a vector or with the columns of a matrix."""
        vectors = np.asarray(vectors, dtype=np.float64)
        result = self.diag.reshape((-1,) + (1,) * (vectors.ndim - 1)) * vectors
        off = self.offdiag.reshape((-1,) + (1,) * (vectors.ndim - 1))
        result[:-1] += off * vectors[1:]
        result[1:] += off * vectors[:-1]
        return result


def site_indices(L: int) -> np.ndarray:
    """Site labels 1..L as floats."""
    return np.arange(1, L + 1, dtype=np.float64)


def build_hamiltonian(params: ModelParams) -> TridiagonalMatrix:
    """Build the AAS Hamiltonian with open boundary conditions.

    Args:
        params (ModelParams): The Hamiltonian instance.

    Returns:
        TridiagonalMatrix: diag[i] = h i + (2J + delta) cos(2 pi (i omega + phi))
        for i = 1..L, and -J on every bond.
    """
    sites = site_indices(params.L)
    # reduce the phase argument into [0, 1) before scaling by 2 pi
    theta = np.mod(sites * params.resolved_omega + params.phi, 1.0)
    diag = params.h * sites + params.aa_amplitude * np.cos(2.0 * np.pi * theta)
    offdiag = np.full(params.L - 1, -params.J, dtype=np.float64)
    return TridiagonalMatrix(diag=diag, offdiag=offdiag)
