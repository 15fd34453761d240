"""
scaling.py

Critical-exponent extraction from phase-averaged sweep data.

Two routes are offered. fit_power_law regresses log y on log x. The
collapse routines rescale every size's curve according to a scaling
ansatz, pool the points, sort them by the scaling variable and score the
pooled sequence with the cost function

    C_Q = sum_i |Q_{i+1} - Q_i| / (max Q - min Q) - 1,

which vanishes exactly when the sorted sequence is monotone. The exponent is
reported as the average over the flat window where C_Q stays within a
relative tolerance of its minimum, with half the window width as the
uncertainty.

Typical usage example:
  data = ScalingData.from_frame(frame, "zeta_mean")
  result = collapse_search(data, ScalingAnsatz(AnsatzKind.ZETA))
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy import stats

from .errors import CollapseError, FitError

logger = logging.getLogger(__name__)

DEFAULT_FLAT_TOL = 0.01
COARSE_STEP = 0.01
FINE_STEP = 0.001
FINE_HALF_SPAN = 0.1
MIN_GRID_SPAN = 0.1
MIN_POINTS_PER_CURVE = 3

# search ranges for the coarse bracketing pass
DEFAULT_RANGES = {
    "nu": (0.05, 1.5),
    "s": (0.0, 1.5),
    "z": (0.5, 4.0),
    "kappa": (-2.0, 2.0),
}


class AnsatzKind(Enum):
    """Finite-size scaling forms, named by the observable they rescale."""

    ZETA = "zeta"                 # zeta / L = f(h L^(1/nu))
    IPR = "ipr"                   # IPR L^(s/nu) = f(h L^(1/nu))
    GAP = "gap"                   # Delta E L^z = f(h L^(1/nu))
    ZETA_2PARAM = "zeta_2param"   # same, at fixed delta L^(1/nu_delta) = c
    IPR_2PARAM = "ipr_2param"
    GAP_2PARAM = "gap_2param"
    KAPPA = "kappa"               # zeta / L = f(h L^(1/nu_c) (|delta| L^(1/nu_delta))^kappa)


_SEARCHED = {
    AnsatzKind.ZETA: "nu",
    AnsatzKind.IPR: "s",
    AnsatzKind.GAP: "z",
    AnsatzKind.ZETA_2PARAM: "nu",
    AnsatzKind.IPR_2PARAM: "s",
    AnsatzKind.GAP_2PARAM: "z",
    AnsatzKind.KAPPA: "kappa",
}

_REQUIRED = {
    AnsatzKind.ZETA: (),
    AnsatzKind.IPR: ("nu",),
    AnsatzKind.GAP: ("nu",),
    AnsatzKind.ZETA_2PARAM: ("nu_delta", "c"),
    AnsatzKind.IPR_2PARAM: ("nu", "nu_delta", "c"),
    AnsatzKind.GAP_2PARAM: ("nu", "nu_delta", "c"),
    AnsatzKind.KAPPA: ("nu_c", "nu_delta"),
}

_SINGLE_PARAMETER = {
    AnsatzKind.ZETA_2PARAM: AnsatzKind.ZETA,
    AnsatzKind.IPR_2PARAM: AnsatzKind.IPR,
    AnsatzKind.GAP_2PARAM: AnsatzKind.GAP,
}


@dataclass(frozen=True)
class ScalingAnsatz:
    """A scaling form plus the exponents held fixed during the search.

    Attributes:
        kind (AnsatzKind): The scaling form.
        fixed_exponents (Mapping[str, float]): e.g. {'nu': 0.292} for the IPR
            and gap forms, {'nu_c': 0.29, 'nu_delta': 1.0} for KAPPA.
    """

    kind: AnsatzKind
    fixed_exponents: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", AnsatzKind(self.kind))
        object.__setattr__(self, "fixed_exponents", {k: float(v) for k, v in self.fixed_exponents.items()})
        missing = [name for name in _REQUIRED[self.kind] if name not in self.fixed_exponents]
        if missing:
            raise ValueError(f"Ansatz {self.kind.value} needs fixed exponents {missing}")

    @property
    def searched(self) -> str:
        """Name of the exponent the collapse searches over."""
        return _SEARCHED[self.kind]

    @property
    def observable(self) -> str:
        return self.kind.value.split("_")[0] if self.kind is not AnsatzKind.KAPPA else "zeta"

    def transform(self, data: "ScalingData", exponent: float) -> Tuple[np.ndarray, np.ndarray]:
        """Rescale data for a trial exponent.

        Returns:
            Tuple[np.ndarray, np.ndarray]: (Q, key) per point.
        """
        kind = _SINGLE_PARAMETER.get(self.kind, self.kind)
        fixed = self.fixed_exponents
        L = data.L
        if kind is AnsatzKind.ZETA:
            return data.value / L, data.h * L ** (1.0 / exponent)
        if kind is AnsatzKind.IPR:
            nu = fixed["nu"]
            return data.value * L ** (exponent / nu), data.h * L ** (1.0 / nu)
        if kind is AnsatzKind.GAP:
            return data.value * L ** exponent, data.h * L ** (1.0 / fixed["nu"])
        # KAPPA
        key = data.h * L ** (1.0 / fixed["nu_c"]) * (np.abs(data.delta) * L ** (1.0 / fixed["nu_delta"])) ** exponent
        return data.value / L, key


@dataclass(frozen=True)
class ScalingData:
    """Aligned per-point arrays of one observable.

    Attributes:
        L, delta, h, value (np.ndarray): One entry per (L, delta, h) point.
        stderr (np.ndarray, optional): Standard error of value.
    """

    L: np.ndarray
    delta: np.ndarray
    h: np.ndarray
    value: np.ndarray
    stderr: Optional[np.ndarray] = None

    def __post_init__(self):
        arrays = {name: np.asarray(getattr(self, name), dtype=np.float64)
                  for name in ("L", "delta", "h", "value")}
        lengths = {array.size for array in arrays.values()}
        if len(lengths) != 1:
            raise ValueError("L, delta, h and value must have equal lengths")
        for name, array in arrays.items():
            object.__setattr__(self, name, array)
        if self.stderr is not None:
            stderr = np.asarray(self.stderr, dtype=np.float64)
            if stderr.size != arrays["value"].size:
                raise ValueError("stderr must match value in length")
            object.__setattr__(self, "stderr", stderr)

    @classmethod
    def from_frame(cls, frame, column: str, stderr_column: Optional[str] = None) -> "ScalingData":
        """Build from a sweep table (pandas DataFrame) and one value column."""
        if stderr_column is None and column.endswith("_mean"):
            candidate = column[: -len("_mean")] + "_stderr"
            stderr_column = candidate if candidate in frame.columns else None
        return cls(
            L=frame["L"].to_numpy(),
            delta=frame["delta"].to_numpy(),
            h=frame["h"].to_numpy(),
            value=frame[column].to_numpy(),
            stderr=None if stderr_column is None else frame[stderr_column].to_numpy(),
        )

    def __len__(self):
        return int(self.value.size)

    @property
    def sizes(self) -> List[int]:
        return sorted({int(L) for L in self.L})

    @property
    def deltas(self) -> List[float]:
        return sorted({float(delta) for delta in self.delta})

    def subset(self, mask) -> "ScalingData":
        mask = np.asarray(mask, dtype=bool)
        return ScalingData(
            L=self.L[mask], delta=self.delta[mask], h=self.h[mask], value=self.value[mask],
            stderr=None if self.stderr is None else self.stderr[mask],
        )

    def finite(self) -> "ScalingData":
        """Drop points whose value is NaN or infinite (failed sweep points)."""
        return self.subset(np.isfinite(self.value))

    def curve(self, L: int, delta: Optional[float] = None) -> "ScalingData":
        mask = self.L == L
        if delta is not None:
            mask &= np.isclose(self.delta, delta, rtol=0.0, atol=1e-12)
        return self.subset(mask)._sorted_by_h()

    def _sorted_by_h(self) -> "ScalingData":
        order = np.argsort(self.h, kind="stable")
        return ScalingData(
            L=self.L[order], delta=self.delta[order], h=self.h[order], value=self.value[order],
            stderr=None if self.stderr is None else self.stderr[order],
        )


@dataclass(frozen=True)
class FitResult:
    """Result of a log-log least-squares fit.

    Attributes:
        exponent (float): Fitted slope.
        stderr (float): Standard error of the slope.
        r_squared (float): Coefficient of determination.
        window (Tuple[float, float]): (x_min, x_max) of the points used.
        n_points (int): Number of points used.
    """

    exponent: float
    stderr: float
    r_squared: float
    window: Tuple[float, float]
    n_points: int


@dataclass(frozen=True)
class ExponentGrid:
    """Uniform grid of trial exponents from start to stop inclusive."""

    start: float
    stop: float
    step: float

    def __post_init__(self):
        if not self.step > 0 or self.stop <= self.start:
            raise ValueError(f"Invalid exponent grid {self.start}..{self.stop} step {self.step}")

    @property
    def span(self) -> float:
        return self.stop - self.start

    def values(self) -> np.ndarray:
        count = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return np.round(self.start + self.step * np.arange(count), 12)


@dataclass(frozen=True)
class CollapseResult:
    """Outcome of a cost-function collapse search.

    Attributes:
        exponent_name (str): Which exponent was searched.
        best_exponent (float): Grid value with minimal C_Q.
        flat_window (Tuple[float, float]): Exponent interval where
            C_Q <= (1 + flat_tol) min C_Q.
        reported (float): Average over the flat window.
        uncertainty (float): Half the window width.
        min_cost (float): Minimal C_Q.
        curve (Tuple[Tuple[float, float], ...]): (exponent, C_Q) pairs.
        fixed_exponents (Mapping[str, float]): Exponents held fixed.
    """

    exponent_name: str
    best_exponent: float
    flat_window: Tuple[float, float]
    reported: float
    uncertainty: float
    min_cost: float
    curve: Tuple[Tuple[float, float], ...]
    fixed_exponents: Mapping[str, float] = field(default_factory=dict)


def fit_power_law(xs: Sequence[float], ys: Sequence[float]) -> FitResult:
    """Fit y = a x^b by ordinary least squares on log y versus log x.

    Args:
        xs (Sequence[float]): Positive abscissae.
        ys (Sequence[float]): Positive ordinates.

    Returns:
        FitResult: b as the exponent with its standard error.

    Raises:
        FitError: With fewer than 3 points, non-positive data or constant x.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape or xs.ndim != 1:
        raise FitError("xs and ys must be one-dimensional and of equal length")
    if xs.size < 3:
        raise FitError(f"Power-law fit needs at least 3 points, got {xs.size}")
    if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(ys))) or np.any(xs <= 0) or np.any(ys <= 0):
        raise FitError("Power-law fit needs finite, strictly positive data")
    if np.all(xs == xs[0]):
        raise FitError("Power-law fit needs at least two distinct x values")
    result = stats.linregress(np.log(xs), np.log(ys))
    r_squared = float(result.rvalue ** 2)
    if not math.isfinite(r_squared):
        r_squared = 1.0
    stderr = float(result.stderr) if math.isfinite(result.stderr) else 0.0
    return FitResult(
        exponent=float(result.slope),
        stderr=stderr,
        r_squared=min(max(r_squared, 0.0), 1.0),
        window=(float(xs.min()), float(xs.max())),
        n_points=int(xs.size),
    )


def cost_function(values: Sequence[float], order_key: Sequence[float]) -> float:
    """Collapse cost of a pooled dataset.

    The values are sorted by ascending order_key. Points with equal keys are
    ordered along the overall trend of the data (ascending value when Q grows
    with the key, descending otherwise), so the result does not depend on
    input order and tied keys never count against a monotone collapse.

    Args:
        values (Sequence[float]): Rescaled observable Q_i.
        order_key (Sequence[float]): Scaling variable of each point.

    Returns:
        float: C_Q >= 0; exactly 0 when the sorted sequence is monotone.

    Raises:
        ValueError: With fewer than 2 points, mismatched lengths or constant Q.
    """
    values = np.asarray(values, dtype=np.float64)
    order_key = np.asarray(order_key, dtype=np.float64)
    if values.shape != order_key.shape or values.size < 2:
        raise ValueError("cost_function needs at least 2 points with one key each")
    spread = values.max() - values.min()
    if not spread > 0:
        raise ValueError("cost_function is undefined for constant data")
    canonical = np.lexsort((values, order_key))
    sorted_key, sorted_values = order_key[canonical], values[canonical]
    if np.dot(sorted_key - sorted_key.mean(), sorted_values - sorted_values.mean()) < 0:
        canonical = np.lexsort((-values, order_key))
    ordered = values[canonical]
    steps = np.diff(ordered)
    if np.all(steps >= 0) or np.all(steps <= 0):
        return 0.0
    return float(np.sum(np.abs(steps)) / spread - 1.0)


def _costs(data: ScalingData, ansatz: ScalingAnsatz, exponents: np.ndarray) -> np.ndarray:
    costs = np.empty(exponents.size)
    for index, exponent in enumerate(exponents):
        values, key = ansatz.transform(data, float(exponent))
        costs[index] = cost_function(values, key) if np.all(np.isfinite(key)) else np.inf
    return costs


def _cost_curve(data: ScalingData, ansatz: ScalingAnsatz, exponents: np.ndarray, n_jobs: int) -> np.ndarray:
    if n_jobs == 1 or exponents.size < 2:
        return _costs(data, ansatz, exponents)
    chunks = np.array_split(exponents, min(exponents.size, 4 * max(abs(n_jobs), 1)))
    parts = Parallel(n_jobs=n_jobs, prefer="threads")(
        delayed(_costs)(data, ansatz, chunk) for chunk in chunks if chunk.size
    )
    return np.concatenate(parts)


def _valid_range(name: str, grid_values: np.ndarray) -> np.ndarray:
    # 1/nu appears in the scaling variable
    if name == "nu":
        return grid_values[grid_values > 0]
    return grid_values


def bracketing_grid(data: ScalingData, ansatz: ScalingAnsatz, n_jobs: int = 1) -> ExponentGrid:
    """Coarse pass over the default range, then a fine grid around its minimum."""
    low, high = DEFAULT_RANGES[ansatz.searched]
    coarse = _valid_range(ansatz.searched, ExponentGrid(low, high, COARSE_STEP).values())
    costs = _cost_curve(data, ansatz, coarse, n_jobs)
    center = float(coarse[int(np.argmin(costs))])
    return ExponentGrid(max(low, center - FINE_HALF_SPAN), min(high, center + FINE_HALF_SPAN), FINE_STEP)


def _check_curves(data: ScalingData, group_by_delta: bool = False) -> None:
    groups = data.deltas if group_by_delta else data.sizes
    column = data.delta if group_by_delta else data.L
    for group in groups:
        count = int(np.sum(np.isclose(column, group, rtol=0.0, atol=1e-12)))
        if count < MIN_POINTS_PER_CURVE:
            label = "delta" if group_by_delta else "L"
            raise CollapseError(f"Curve {label}={group} has {count} points; at least "
                                f"{MIN_POINTS_PER_CURVE} are needed")


def _flat_window(exponents: np.ndarray, costs: np.ndarray, flat_tol: float) -> Tuple[int, int, int]:
    finite = np.isfinite(costs)
    if not np.any(finite):
        raise CollapseError("Cost function is undefined over the whole exponent grid")
    best = int(np.argmin(np.where(finite, costs, np.inf)))
    threshold = costs[best] * (1.0 + flat_tol)
    lo = best
    while lo > 0 and costs[lo - 1] <= threshold:
        lo -= 1
    hi = best
    while hi < costs.size - 1 and costs[hi + 1] <= threshold:
        hi += 1
    if lo == 0 or hi == costs.size - 1:
        raise CollapseError(
            f"Flat window [{exponents[lo]:.4f}, {exponents[hi]:.4f}] touches the edge of the exponent grid "
            f"[{exponents[0]:.4f}, {exponents[-1]:.4f}]; widen the grid"
        )
    return best, lo, hi


def _search(data: ScalingData, ansatz: ScalingAnsatz, exponent_grid: Optional[ExponentGrid],
            flat_tol: float, n_jobs: int) -> CollapseResult:
    data = data.finite()
    if exponent_grid is None:
        exponent_grid = bracketing_grid(data, ansatz, n_jobs)
    elif exponent_grid.span < MIN_GRID_SPAN - 1e-12:
        raise CollapseError(f"Exponent grid must span at least {MIN_GRID_SPAN}, got {exponent_grid.span}")
    exponents = _valid_range(ansatz.searched, exponent_grid.values())
    costs = _cost_curve(data, ansatz, exponents, n_jobs)
    best, lo, hi = _flat_window(exponents, costs, flat_tol)
    window = exponents[lo:hi + 1]
    result = CollapseResult(
        exponent_name=ansatz.searched,
        best_exponent=float(exponents[best]),
        flat_window=(float(exponents[lo]), float(exponents[hi])),
        reported=float(np.mean(window)),
        uncertainty=float((exponents[hi] - exponents[lo]) / 2.0),
        min_cost=float(costs[best]),
        curve=tuple((float(e), float(c)) for e, c in zip(exponents, costs)),
        fixed_exponents=dict(ansatz.fixed_exponents),
    )
    logger.info("Collapse %s: %s = %.4f +/- %.4f (window %.4f..%.4f, C_Q min %.3e)",
                ansatz.kind.value, result.exponent_name, result.reported, result.uncertainty,
                result.flat_window[0], result.flat_window[1], result.min_cost)
    return result


def collapse_search(data: ScalingData, ansatz: ScalingAnsatz, exponent_grid: Optional[ExponentGrid] = None,
                    flat_tol: float = DEFAULT_FLAT_TOL, n_jobs: int = 1) -> CollapseResult:
    """Find the exponent that best collapses the per-size curves.

    Args:
        data (ScalingData): Points of at least 3 system sizes.
        ansatz (ScalingAnsatz): ZETA, IPR or GAP form (2PARAM forms are
            accepted and treated on the h axis alone).
        exponent_grid (ExponentGrid, optional): Trial exponents; a coarse
            bracketing pass picks a fine grid when omitted.
        flat_tol (float): Relative tolerance defining the flat window.
        n_jobs (int): Threads for evaluating grid points.

    Returns:
        CollapseResult: Best exponent, flat window and the C_Q curve.

    Raises:
        CollapseError: Too few sizes or points, a grid narrower than 0.1, or
            a flat window touching the grid edge.
    """
    if ansatz.kind is AnsatzKind.KAPPA:
        raise ValueError("Use kappa_collapse for the hybrid ansatz")
    data = data.finite()
    if len(data.sizes) < 3:
        raise CollapseError(f"Collapse needs at least 3 system sizes, got {data.sizes}")
    _check_curves(data)
    return _search(data, ansatz, exponent_grid, flat_tol, n_jobs)


def two_param_collapse(data: ScalingData, ansatz: ScalingAnsatz, exponent_grid: Optional[ExponentGrid] = None,
                       flat_tol: float = DEFAULT_FLAT_TOL, n_jobs: int = 1, atol: float = 1e-9) -> CollapseResult:
    """Collapse on the h axis with delta L^(1/nu_delta) frozen at c.

    Raises:
        ValueError: If the ansatz is not a 2PARAM form or the data's delta
            values do not follow delta = c L^(-1/nu_delta).
        CollapseError: As collapse_search.
    """
    if ansatz.kind not in _SINGLE_PARAMETER:
        raise ValueError(f"two_param_collapse needs a 2PARAM ansatz, got {ansatz.kind.value}")
    data = data.finite()
    c = ansatz.fixed_exponents["c"]
    nu_delta = ansatz.fixed_exponents["nu_delta"]
    expected = c * data.L ** (-1.0 / nu_delta)
    if not np.allclose(data.delta, expected, rtol=1e-9, atol=atol):
        raise ValueError(f"delta values do not follow delta L^(1/{nu_delta}) = {c}")
    return collapse_search(data, ansatz, exponent_grid, flat_tol, n_jobs)


def kappa_collapse(data: ScalingData, nu_c: float, nu_delta: float, kappa_grid: Optional[ExponentGrid] = None,
                   flat_tol: float = DEFAULT_FLAT_TOL, n_jobs: int = 1) -> CollapseResult:
    """Find the hybrid exponent kappa at fixed L across several delta < 0.

    The scaling variable is h L^(1/nu_c) (|delta| L^(1/nu_delta))^kappa.

    Raises:
        CollapseError: Unless the data holds one size and at least 4
            distinct negative delta values; otherwise as collapse_search.
    """
    data = data.finite()
    if len(data.sizes) != 1:
        raise CollapseError(f"kappa_collapse needs a single system size, got {data.sizes}")
    deltas = data.deltas
    if len(deltas) < 4 or any(delta >= 0 for delta in deltas):
        raise CollapseError(f"kappa_collapse needs at least 4 negative delta values, got {deltas}")
    _check_curves(data, group_by_delta=True)
    ansatz = ScalingAnsatz(AnsatzKind.KAPPA, {"nu_c": nu_c, "nu_delta": nu_delta})
    return _search(data, ansatz, kappa_grid, flat_tol, n_jobs)


def hybrid_kappa_prediction(nu_delta: float, nu_s: float, nu_c: float) -> float:
    """kappa = nu_delta (1/nu_s - 1/nu_c)."""
    return nu_delta * (1.0 / nu_s - 1.0 / nu_c)


def size_independent_window(data: ScalingData, n_sigma: float = 2.0) -> Tuple[float, float]:
    """h window where the two largest sizes agree within n_sigma standard errors.

    The window is the longest run of agreeing points ending at the largest
    shared h, i.e. the size-independent tail of the curves.

    Raises:
        FitError: With fewer than two sizes or fewer than 3 agreeing points.
    """
    data = data.finite()
    sizes = data.sizes
    if len(sizes) < 2:
        raise FitError("size_independent_window needs at least two system sizes")
    largest = data.curve(sizes[-1])
    second = data.curve(sizes[-2])
    shared, index_a, index_b = np.intersect1d(largest.h, second.h, return_indices=True)
    if shared.size == 0:
        raise FitError("The two largest sizes share no h values")
    a, b = largest.value[index_a], second.value[index_b]
    if largest.stderr is not None and second.stderr is not None:
        sigma = np.hypot(largest.stderr[index_a], second.stderr[index_b])
    else:
        sigma = np.zeros_like(a)
    agree = np.abs(a - b) <= n_sigma * sigma + 1e-12 * np.abs(b)
    count = 0
    for flag in agree[::-1]:
        if not flag:
            break
        count += 1
    if count < MIN_POINTS_PER_CURVE:
        raise FitError(f"Only {count} size-independent points at large h; pass an explicit window")
    tail = shared[-count:]
    return float(tail[0]), float(tail[-1])


@dataclass(frozen=True)
class QfiScalingResult:
    """QFI system-size exponent beta with the 2/nu prediction for comparison."""

    fit: FitResult
    predicted_beta: Optional[float] = None

    @property
    def beta(self) -> float:
        return self.fit.exponent


def qfi_scaling(sizes: Sequence[int], qfi_values: Sequence[float], nu: Optional[float] = None) -> QfiScalingResult:
    """Fit F_Q ~ L^beta at a field inside the finite-size plateau.

    Args:
        sizes (Sequence[int]): System sizes, at least 3.
        qfi_values (Sequence[float]): Phase-averaged F_Q per size.
        nu (float, optional): Localization-length exponent; reports 2/nu (d = 1).

    Raises:
        FitError: With fewer than 3 sizes or non-positive values.
    """
    if len(set(int(L) for L in sizes)) < 3:
        raise FitError(f"QFI scaling fit needs at least 3 sizes, got {list(sizes)}")
    fit = fit_power_law(sizes, qfi_values)
    return QfiScalingResult(fit=fit, predicted_beta=None if nu is None else 2.0 / nu)


@dataclass(frozen=True)
class DriftRow:
    """Exponents extracted at one delta < 0."""

    delta: float
    nu: float = float("nan")
    nu_uncertainty: float = float("nan")
    s: float = float("nan")
    s_uncertainty: float = float("nan")
    z: float = float("nan")
    z_uncertainty: float = float("nan")
    error: Optional[str] = None

    @property
    def s_over_nu(self) -> float:
        return self.s / self.nu


def exponent_drift(tables: Mapping[str, ScalingData], deltas: Optional[Sequence[float]] = None,
                   grids: Optional[Mapping[str, ExponentGrid]] = None, flat_tol: float = DEFAULT_FLAT_TOL,
                   n_jobs: int = 1) -> List[DriftRow]:
    """Track nu, s and z as the detuning moves away from AA criticality.

    For each delta the zeta collapse gives nu, which is then held fixed in
    the IPR collapse (s) and the gap collapse (z).

    Args:
        tables (Mapping[str, ScalingData]): Data for 'zeta', 'ipr' and 'gap'.
        deltas (Sequence[float], optional): delta values to analyse; all
            delta <= 0 present in the zeta table by default.
        grids (Mapping[str, ExponentGrid], optional): Per-exponent grids
            keyed 'nu', 's', 'z'.
        flat_tol (float): Flat-window tolerance.
        n_jobs (int): Threads for the grid evaluation.

    Returns:
        List[DriftRow]: One row per delta, ordered by decreasing delta.
            Failures are recorded in the row instead of raised.
    """
    grids = dict(grids or {})
    missing = {"zeta", "ipr", "gap"} - set(tables)
    if missing:
        raise ValueError(f"exponent_drift needs tables for {sorted(missing)}")
    if deltas is None:
        deltas = [delta for delta in tables["zeta"].deltas if delta <= 0]
    rows = []
    for delta in sorted(deltas, reverse=True):
        def at_delta(name):
            table = tables[name]
            return table.subset(np.isclose(table.delta, delta, rtol=0.0, atol=1e-12))

        try:
            nu = collapse_search(at_delta("zeta"), ScalingAnsatz(AnsatzKind.ZETA), grids.get("nu"),
                                 flat_tol, n_jobs)
            fixed = {"nu": nu.reported}
            s = collapse_search(at_delta("ipr"), ScalingAnsatz(AnsatzKind.IPR, fixed), grids.get("s"),
                                flat_tol, n_jobs)
            z = collapse_search(at_delta("gap"), ScalingAnsatz(AnsatzKind.GAP, fixed), grids.get("z"),
                                flat_tol, n_jobs)
        except (CollapseError, ValueError) as error:
            logger.warning("Exponent drift failed at delta=%r: %s", delta, error)
            rows.append(DriftRow(delta=float(delta), error=str(error)))
            continue
        rows.append(DriftRow(
            delta=float(delta),
            nu=nu.reported, nu_uncertainty=nu.uncertainty,
            s=s.reported, s_uncertainty=s.uncertainty,
            z=z.reported, z_uncertainty=z.uncertainty,
        ))
    return rows

