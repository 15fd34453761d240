"""
observables.py

Localization observables of a single AAS instance: probability density,
localization center and length, inverse participation ratio, energy gap,
ground-state fidelity and the quantum Fisher information (QFI) with respect
to the Stark field h.

Site labels run 1..L everywhere, matching lattice.build_hamiltonian.
"""

from dataclasses import dataclass, replace
from typing import Iterable, Optional

import numpy as np

from .eigensolver import Spectrum, eigh_tridiagonal, lowest_k
from .errors import DegenerateGroundStateError
from .lattice import ModelParams, build_hamiltonian, site_indices

ZETA = "zeta"
IPR = "ipr"
GAP = "gap"
QFI = "qfi"
OBSERVABLES = (ZETA, IPR, GAP, QFI)

_NORM_TOL = 1e-10


@dataclass(frozen=True)
class ObservableRecord:
    """Observables of one (L, delta, h, phi) instance.

    Attributes:
        params (ModelParams): The instance.
        zeta (float): Localization length of the ground state, in sites.
        ipr (float): Inverse participation ratio of the ground state.
        gap (float): E_1 - E_0.
        qfi (float, optional): Ground-state QFI with respect to h.
        fidelity_vs_stark (float, optional): Overlap with the pure-Stark ground state.
    """

    params: ModelParams
    zeta: float
    ipr: float
    gap: float
    qfi: Optional[float] = None
    fidelity_vs_stark: Optional[float] = None


def _as_probability(p) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 1 or p.size == 0:
        raise ValueError("Probability vector must be one-dimensional and non-empty")
    if abs(p.sum() - 1.0) > _NORM_TOL:
        raise ValueError(f"Probabilities must sum to 1, got {p.sum()!r}")
    return p


def probability_density(state) -> np.ndarray:
    """Return p_i = |psi_i|^2 for a normalized real state.

    Raises:
        ValueError: If the state is not normalized within 1e-10.
    """
    state = np.asarray(state, dtype=np.float64)
    norm = float(np.dot(state, state))
    if abs(norm - 1.0) > _NORM_TOL:
        raise ValueError(f"State must be normalized, got <psi|psi> = {norm!r}")
    return state * state


def localization_center(p) -> float:
    """Return i_c = sum_i i p_i with i = 1..L."""
    p = _as_probability(p)
    return float(np.dot(site_indices(p.size), p))


def localization_length(p) -> float:
    """Return zeta = sqrt(sum_i (i - i_c)^2 p_i)."""
    p = _as_probability(p)
    sites = site_indices(p.size)
    center = float(np.dot(sites, p))
    spread = float(np.dot((sites - center) ** 2, p))
    return float(np.sqrt(max(spread, 0.0)))


def ipr(p) -> float:
    """Return the inverse participation ratio sum_i p_i^2."""
    p = _as_probability(p)
    return float(np.dot(p, p))


def energy_gap(spectrum: Spectrum) -> float:
    """Return E_1 - E_0.

    Raises:
        ValueError: If fewer than two eigenpairs are available.
    """
    if spectrum.count < 2:
        raise ValueError("energy_gap needs at least two eigenpairs")
    return float(max(spectrum.energies[1] - spectrum.energies[0], 0.0))


def fidelity(a, b) -> float:
    """Return |<a|b>| for two normalized real states.

    Raises:
        ValueError: If the vectors differ in length.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"Length mismatch: {a.shape} vs {b.shape}")
    return float(min(abs(np.dot(a, b)), 1.0))


def qfi_perturbative(spectrum: Spectrum, L: Optional[int] = None) -> float:
    """Ground-state QFI with respect to h from first-order perturbation theory.

    F_Q = 4 sum_{n>0} |<psi_n| X |psi_0>|^2 / (E_n - E_0)^2 with X = diag(1..L),
    the exact derivative dH/dh.

    Args:
        spectrum (Spectrum): Full spectrum of the instance.
        L (int, optional): System size; defaults to the spectrum's.

    Returns:
        float: F_Q >= 0.

    Raises:
        ValueError: If the spectrum is not complete.
        DegenerateGroundStateError: If E_1 - E_0 <= 1e-13 ||H||.
    """
    L = spectrum.size if L is None else L
    if spectrum.count != L or spectrum.size != L:
        raise ValueError("qfi_perturbative needs the full spectrum")
    if L < 2:
        return 0.0
    scale = max(float(np.max(np.abs(spectrum.energies))), np.finfo(np.float64).tiny)
    denominators = spectrum.energies[1:] - spectrum.energies[0]
    if denominators[0] <= 1e-13 * scale:
        raise DegenerateGroundStateError(
            f"Ground state is degenerate (E_1 - E_0 = {denominators[0]:.3e}); QFI undefined"
        )
    ground = spectrum.states[:, 0]
    elements = spectrum.states[:, 1:].T @ (site_indices(L) * ground)
    return float(4.0 * np.sum((elements / denominators) ** 2))


def qfi_finite_difference(psi_minus, psi_plus, eps: float, psi=None) -> float:
    """Ground-state QFI from a central difference of states at h -/+ eps.

    F_Q = 4 (<d|d> - |<d|psi>|^2), d = (psi_plus - psi_minus) / (2 eps).

    Args:
        psi_minus (np.ndarray): Normalized ground state at h - eps.
        psi_plus (np.ndarray): Normalized ground state at h + eps.
        eps (float): Step, > 0.
        psi (np.ndarray, optional): State at h; the normalized midpoint is
            used when omitted.

    Raises:
        ValueError: If eps is not positive or the shapes differ.
    """
    if not eps > 0:
        raise ValueError(f"eps must be positive, got {eps}")
    psi_minus = np.asarray(psi_minus, dtype=np.float64)
    psi_plus = np.asarray(psi_plus, dtype=np.float64)
    if psi_minus.shape != psi_plus.shape:
        raise ValueError(f"Length mismatch: {psi_minus.shape} vs {psi_plus.shape}")
    if np.dot(psi_minus, psi_plus) < 0:
        psi_plus = -psi_plus
    if psi is None:
        psi = psi_minus + psi_plus
        psi = psi / np.linalg.norm(psi)
    else:
        psi = np.asarray(psi, dtype=np.float64)
        if np.dot(psi, psi_minus) < 0:
            psi = -psi
    derivative = (psi_plus - psi_minus) / (2.0 * eps)
    value = 4.0 * (np.dot(derivative, derivative) - np.dot(derivative, psi) ** 2)
    return float(max(value, 0.0))


def finite_difference_step(h: float) -> float:
    """Default central-difference step max(1e-3 h, 1e-12)."""
    return max(1e-3 * h, 1e-12)


def ground_state(params: ModelParams) -> np.ndarray:
    """Gauge-fixed ground state of one instance."""
    return lowest_k(build_hamiltonian(params), 1).ground_state


def stark_reference(params: ModelParams, delta_ref: Optional[float] = None) -> ModelParams:
    """The reference instance for the fidelity map (default: pure Stark, delta = -2J)."""
    delta = -2.0 * params.J if delta_ref is None else delta_ref
    return replace(params, delta=delta)


def qfi_at(params: ModelParams, method: str = "perturbative", eps: Optional[float] = None) -> float:
    """Ground-state QFI of one instance.

    Args:
        params (ModelParams): The instance.
        method (str): 'perturbative' (method of record) or 'finite_difference'.
        eps (float, optional): Finite-difference step; defaults to
            finite_difference_step(h).
    """
    if method == "perturbative":
        return qfi_perturbative(eigh_tridiagonal(build_hamiltonian(params)), params.L)
    if method == "finite_difference":
        eps = finite_difference_step(params.h) if eps is None else eps
        # stay on the physical side h >= 0
        h_minus = max(params.h - eps, 0.0)
        h_plus = h_minus + 2.0 * eps
        psi_minus = ground_state(params.with_field(h_minus))
        psi_plus = ground_state(params.with_field(h_plus))
        return qfi_finite_difference(psi_minus, psi_plus, eps)
    raise ValueError(f"Unsupported QFI method: {method}")


def observe(params: ModelParams, observables: Iterable[str] = (ZETA, IPR, GAP),
            delta_ref: Optional[float] = None) -> ObservableRecord:
    """Evaluate the requested observables for one phase sample.

    zeta, IPR and the gap are always computed from the two lowest eigenpairs;
    the full spectrum is only solved when the QFI is requested.

    Args:
        params (ModelParams): The instance.
        observables (Iterable[str]): Subset of OBSERVABLES, plus 'fidelity'.
        delta_ref (float, optional): Reference detuning for 'fidelity'.

    Returns:
        ObservableRecord: The single-sample observables.
    """
    requested = set(observables)
    unknown = requested - set(OBSERVABLES) - {"fidelity"}
    if unknown:
        raise ValueError(f"Unknown observables: {sorted(unknown)}")
    matrix = build_hamiltonian(params)
    if QFI in requested:
        spectrum = eigh_tridiagonal(matrix)
        qfi_value = qfi_perturbative(spectrum, params.L)
    else:
        spectrum = lowest_k(matrix, 2)
        qfi_value = None
    p = probability_density(spectrum.ground_state)
    fidelity_value = None
    if "fidelity" in requested:
        reference_params = stark_reference(params, delta_ref)
        if reference_params == params:
            fidelity_value = 1.0
        else:
            fidelity_value = fidelity(spectrum.ground_state, ground_state(reference_params))
    return ObservableRecord(
        params=params,
        zeta=localization_length(p),
        ipr=ipr(p),
        gap=energy_gap(spectrum),
        qfi=qfi_value,
        fidelity_vs_stark=fidelity_value,
    )
