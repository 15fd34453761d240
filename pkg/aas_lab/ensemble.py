"""
ensemble.py

Configuration averaging over the random phase phi.

Every phase is drawn from a generator keyed on (master_seed, point_id,
sample_index), so a sample's value never depends on execution order or on
the number of workers. Work is split into (point, sample chunk) items and
evaluated with a joblib worker pool; the per-sample values are reduced in
sample-index order, which keeps the statistics bit-stable across thread
counts.
"""

import hashlib
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed

from .errors import AASLabError, NumericalError
from .lattice import SweepPoint, is_fibonacci_size
from .observables import GAP, IPR, OBSERVABLES, QFI, ZETA, observe

logger = logging.getLogger(__name__)

FIDELITY = "fidelity"
DEFAULT_SAMPLES = 500
DEFAULT_CHUNK_SIZE = 50


def point_id(L: int, delta: float, h: float) -> int:
    """Stable 64-bit identifier of an (L, delta, h) point."""
    # adding 0.0 maps -0.0 onto 0.0
    key = f"{int(L)}|{float(delta) + 0.0!r}|{float(h) + 0.0!r}".encode("utf-8")
    return int.from_bytes(hashlib.sha256(key).digest()[:8], "little")


def sample_phase(master_seed: int, point: int, sample_index: int) -> float:
    """Draw the phase of one sample.

    Args:
        master_seed (int): Run-level seed.
        point (int): Point identifier, see point_id.
        sample_index (int): Index of the sample within the point.

    Returns:
        float: phi in [0, 1).

    Raises:
        ValueError: If any argument is negative.
    """
    if master_seed < 0 or point < 0 or sample_index < 0:
        raise ValueError("Seeds and indices must be non-negative")
    rng = np.random.default_rng([int(master_seed), int(point), int(sample_index)])
    return float(rng.random())


@dataclass(frozen=True)
class EnsembleStat:
    """Mean and standard error of one observable over the phase ensemble."""

    mean: float
    stderr: float
    n: int

    @classmethod
    def from_samples(cls, values: Sequence[float]) -> "EnsembleStat":
        values = np.asarray(values, dtype=np.float64)
        n = int(values.size)
        if n == 0:
            raise ValueError("Cannot reduce an empty sample set")
        if np.all(values == values[0]):
            return cls(mean=float(values[0]), stderr=0.0, n=n)
        stderr = float(np.std(values, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
        return cls(mean=float(np.mean(values)), stderr=stderr, n=n)

    @classmethod
    def missing(cls, n: int) -> "EnsembleStat":
        return cls(mean=float("nan"), stderr=float("nan"), n=n)


@dataclass(frozen=True)
class EnsembleRecord:
    """Phase-averaged observables of one (L, delta, h) point.

    Attributes:
        point (SweepPoint): The grid point.
        n_samples (int): Number of phase samples.
        stats (Dict[str, EnsembleStat]): One entry per requested observable.
        error (str, optional): Failure message when the point could not be evaluated.
    """

    point: SweepPoint
    n_samples: int
    stats: Dict[str, EnsembleStat] = field(default_factory=dict)
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def stat(self, name: str) -> Optional[EnsembleStat]:
        return self.stats.get(name)

    @property
    def zeta(self):
        return self.stat(ZETA)

    @property
    def ipr(self):
        return self.stat(IPR)

    @property
    def gap(self):
        return self.stat(GAP)

    @property
    def qfi(self):
        return self.stat(QFI)

    @property
    def fidelity(self):
        return self.stat(FIDELITY)


@dataclass(frozen=True)
class DeltaRule:
    """delta = c * L^(-1 / nu_delta), i.e. a fixed value c of delta L^(1/nu_delta)."""

    c: float
    nu_delta: float

    def delta_for(self, L: int) -> float:
        return float(self.c * L ** (-1.0 / self.nu_delta))


def log_spaced(min_decade: float, max_decade: float, points_per_decade: int) -> Tuple[float, ...]:
    """Log-spaced h values covering [10^min_decade, 10^max_decade]."""
    if max_decade <= min_decade or points_per_decade < 1:
        raise ValueError("Need max_decade > min_decade and points_per_decade >= 1")
    count = int(round((max_decade - min_decade) * points_per_decade)) + 1
    return tuple(float(value) for value in np.logspace(min_decade, max_decade, count))


@dataclass(frozen=True)
class SweepGrid:
    """Grid of (L, delta, h) points with its sampling settings.

    Exactly one of deltas and delta_rule is used; delta_rule wins when set.
    """

    sizes: Tuple[int, ...]
    h_values: Tuple[float, ...]
    deltas: Tuple[float, ...] = (0.0,)
    delta_rule: Optional[DeltaRule] = None
    n_samples: int = DEFAULT_SAMPLES
    master_seed: int = 0
    J: float = 1.0
    omega: Optional[float] = None

    def __post_init__(self):
        if not self.sizes:
            raise ValueError("Grid needs at least one size")
        bad = [L for L in self.sizes if not is_fibonacci_size(int(L))]
        if bad and self.omega is None:
            raise ValueError(f"Sizes must be Fibonacci numbers unless omega is given, got {bad}")
        h = np.asarray(self.h_values, dtype=np.float64)
        if h.size == 0 or np.any(h <= 0) or np.any(np.diff(h) <= 0):
            raise ValueError("h_values must be strictly positive and strictly ascending")
        if self.n_samples < 1:
            raise ValueError(f"n_samples must be >= 1, got {self.n_samples}")
        if not 0 <= self.master_seed < 2 ** 64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")

    def deltas_for(self, L: int) -> List[float]:
        if self.delta_rule is not None:
            return [self.delta_rule.delta_for(L)]
        return sorted(float(delta) for delta in self.deltas)

    def points(self) -> List[SweepPoint]:
        """All grid points ordered lexicographically by (L, delta, h)."""
        points = [
            SweepPoint(L=int(L), delta=delta, h=float(h), J=self.J, omega=self.omega)
            for L in sorted(set(self.sizes))
            for delta in self.deltas_for(int(L))
            for h in self.h_values
        ]
        return sorted(points, key=lambda point: (point.L, point.delta, point.h))


def _evaluate_chunk(point: SweepPoint, master_seed: int, start: int, stop: int,
                    observables: Tuple[str, ...], delta_ref: Optional[float]):
    """Worker: evaluate samples [start, stop) of one point.

    Returns a (values, error) pair; values maps observable name to a list
    ordered by sample index, error is None or the annotated failure message.
    """
    pid = point_id(point.L, point.delta, point.h)
    values = {name: [] for name in observables}
    for sample_index in range(start, stop):
        try:
            record = observe(point.with_phase(sample_phase(master_seed, pid, sample_index)),
                             observables, delta_ref=delta_ref)
        except (AASLabError, ValueError, np.linalg.LinAlgError) as error:
            return values, (f"{type(error).__name__} at point (L={point.L}, delta={point.delta!r}, "
                            f"h={point.h!r}) sample {sample_index}: {error}")
        for name in observables:
            values[name].append(record.fidelity_vs_stark if name == FIDELITY else getattr(record, name))
    return values, None


def _chunks(n_samples: int, chunk_size: int) -> List[Tuple[int, int]]:
    return [(start, min(start + chunk_size, n_samples)) for start in range(0, n_samples, chunk_size)]


def _normalize_observables(observables: Iterable[str]) -> Tuple[str, ...]:
    selection = tuple(dict.fromkeys(observables))
    unknown = set(selection) - set(OBSERVABLES) - {FIDELITY}
    if unknown:
        raise ValueError(f"Unknown observables: {sorted(unknown)}")
    return selection


def _evaluate_points(points: Sequence[SweepPoint], n_samples: int, master_seed: int,
                     observables: Tuple[str, ...], delta_ref: Optional[float], n_jobs: int,
                     chunk_size: int) -> List[EnsembleRecord]:
    spans = _chunks(n_samples, chunk_size)
    tasks = [(point, start, stop) for point in points for start, stop in spans]
    results = Parallel(n_jobs=n_jobs)(
        delayed(_evaluate_chunk)(point, master_seed, start, stop, observables, delta_ref)
        for point, start, stop in tasks
    )
    records = []
    per_point = len(spans)
    for index, point in enumerate(points):
        chunk_results = results[index * per_point:(index + 1) * per_point]
        errors = [error for _, error in chunk_results if error is not None]
        if errors:
            logger.warning("Point failed: %s", errors[0])
            stats = {name: EnsembleStat.missing(n_samples) for name in observables}
            records.append(EnsembleRecord(point=point, n_samples=n_samples, stats=stats, error=errors[0]))
            continue
        # concatenation in chunk order is sample-index order
        stats = {
            name: EnsembleStat.from_samples([value for values, _ in chunk_results for value in values[name]])
            for name in observables
        }
        records.append(EnsembleRecord(point=point, n_samples=n_samples, stats=stats))
    return records


def average_point(point: SweepPoint, n_samples: int, master_seed: int,
                  observables: Iterable[str] = (ZETA, IPR, GAP), delta_ref: Optional[float] = None,
                  n_jobs: int = 1, chunk_size: int = DEFAULT_CHUNK_SIZE) -> EnsembleRecord:
    """Phase-average the observables of one point.

    Args:
        point (SweepPoint): The (L, delta, h) point.
        n_samples (int): Number of phase samples, >= 1.
        master_seed (int): Run-level seed.
        observables (Iterable[str]): Observables to average.
        delta_ref (float, optional): Reference detuning for 'fidelity'.
        n_jobs (int): Worker count.
        chunk_size (int): Samples per work item.

    Returns:
        EnsembleRecord: Mean and standard error per observable.

    Raises:
        NumericalError: If any sample fails; the message names point and sample.
    """
    if n_samples < 1:
        raise ValueError(f"n_samples must be >= 1, got {n_samples}")
    selection = _normalize_observables(observables)
    record, = _evaluate_points([point], n_samples, master_seed, selection, delta_ref, n_jobs, chunk_size)
    if record.failed:
        raise NumericalError(record.error)
    return record


def average_fidelity(point: SweepPoint, n_samples: int, master_seed: int,
                     delta_ref: Optional[float] = None, n_jobs: int = 1) -> EnsembleStat:
    """Phase-averaged fidelity between the AAS and the reference ground state."""
    return average_point(point, n_samples, master_seed, (FIDELITY,), delta_ref=delta_ref,
                         n_jobs=n_jobs).stats[FIDELITY]


def run_sweep(grid: SweepGrid, observables: Iterable[str] = (ZETA, IPR, GAP), n_jobs: int = 1,
              chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[EnsembleRecord]:
    """Evaluate every point of a grid.

    Failing points are kept in the output with their error set and NaN
    statistics.

    Returns:
        List[EnsembleRecord]: One record per point, ordered by (L, delta, h).
    """
    selection = _normalize_observables(observables)
    points = grid.points()
    logger.info("Sweep: %d points x %d samples, observables=%s, n_jobs=%s",
                len(points), grid.n_samples, ",".join(selection), n_jobs)
    records = _evaluate_points(points, grid.n_samples, grid.master_seed, selection, None, n_jobs, chunk_size)
    failed = sum(record.failed for record in records)
    if failed:
        logger.warning("Sweep finished with %d failed points out of %d", failed, len(records))
    else:
        logger.info("Sweep finished: %d points", len(records))
    return records


def run_fidelity_map(L: int, deltas: Iterable[float], h_values: Iterable[float], n_samples: int,
                     master_seed: int, delta_ref: Optional[float] = None, J: float = 1.0,
                     omega: Optional[float] = None, n_jobs: int = 1,
                     chunk_size: int = DEFAULT_CHUNK_SIZE) -> List[EnsembleRecord]:
    """Phase-averaged fidelity on a (delta, h) grid at fixed L, ordered by (delta, h)."""
    points = sorted(
        (SweepPoint(L=L, delta=float(delta), h=float(h), J=J, omega=omega)
         for delta in deltas for h in h_values),
        key=lambda point: (point.delta, point.h),
    )
    logger.info("Fidelity map: L=%d, %d points x %d samples", L, len(points), n_samples)
    return _evaluate_points(points, n_samples, master_seed, (FIDELITY,), delta_ref, n_jobs, chunk_size)
