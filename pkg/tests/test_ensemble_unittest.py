import math
import unittest

import numpy as np
import pytest
from joblib import parallel_backend
from scipy import stats

from aas_lab import ensemble
from aas_lab.ensemble import (
    DeltaRule,
    EnsembleStat,
    SweepGrid,
    average_fidelity,
    average_point,
    log_spaced,
    point_id,
    run_fidelity_map,
    run_sweep,
    sample_phase,
)
from aas_lab.errors import EigensolverError, NumericalError
from aas_lab.lattice import SweepPoint
from aas_lab.observables import observe


class SamplePhaseTestCase(unittest.TestCase):

    def test_deterministic(self):
        self.assertEqual(sample_phase(42, 7, 3), sample_phase(42, 7, 3))

    def test_neighbouring_indices_differ(self):
        self.assertNotEqual(sample_phase(42, 7, 3), sample_phase(42, 7, 4))
        self.assertNotEqual(sample_phase(42, 7, 3), sample_phase(43, 7, 3))

    def test_negative_arguments(self):
        with self.assertRaises(ValueError):
            sample_phase(-1, 0, 0)

    def test_uniform_distribution(self):
        pid = point_id(144, 0.0, 1e-3)
        values = np.array([sample_phase(2024, pid, k) for k in range(100_000)])
        self.assertTrue(np.all((values >= 0.0) & (values < 1.0)))
        self.assertAlmostEqual(values.mean(), 0.5, delta=0.005)
        self.assertLess(stats.kstest(values, "uniform").statistic, 0.01)


class PointIdTestCase(unittest.TestCase):

    def test_stable_and_distinct(self):
        self.assertEqual(point_id(144, 0.0, 1e-3), point_id(144, 0.0, 1e-3))
        self.assertEqual(point_id(144, -0.0, 1e-3), point_id(144, 0.0, 1e-3))
        self.assertNotEqual(point_id(144, 0.0, 1e-3), point_id(144, 0.0, 2e-3))
        self.assertNotEqual(point_id(144, 0.0, 1e-3), point_id(233, 0.0, 1e-3))
        self.assertLess(point_id(144, 0.0, 1e-3), 2 ** 64)


class EnsembleStatTestCase(unittest.TestCase):

    def test_single_sample(self):
        stat = EnsembleStat.from_samples([3.5])
        self.assertEqual((stat.mean, stat.stderr, stat.n), (3.5, 0.0, 1))

    def test_identical_samples(self):
        stat = EnsembleStat.from_samples([0.1] * 7)
        self.assertEqual(stat.stderr, 0.0)
        self.assertEqual(stat.mean, 0.1)

    def test_standard_error(self):
        stat = EnsembleStat.from_samples([1.0, 2.0, 3.0, 4.0])
        self.assertAlmostEqual(stat.mean, 2.5)
        self.assertAlmostEqual(stat.stderr, np.std([1.0, 2.0, 3.0, 4.0], ddof=1) / 2.0)

    def test_empty(self):
        with self.assertRaises(ValueError):
            EnsembleStat.from_samples([])


class SweepGridTestCase(unittest.TestCase):

    def test_points_are_sorted(self):
        grid = SweepGrid(sizes=(21, 13), h_values=(1e-3, 1e-2), deltas=(0.0, -0.1))
        keys = [(point.L, point.delta, point.h) for point in grid.points()]
        self.assertEqual(keys, sorted(keys))
        self.assertEqual(len(keys), 8)

    def test_delta_rule(self):
        grid = SweepGrid(sizes=(144, 233), h_values=(1e-3,), delta_rule=DeltaRule(c=1.0, nu_delta=0.29))
        for point in grid.points():
            self.assertAlmostEqual(point.delta, point.L ** (-1.0 / 0.29), places=15)

    def test_validation(self):
        with self.assertRaises(ValueError):
            SweepGrid(sizes=(100,), h_values=(1e-3,))
        with self.assertRaises(ValueError):
            SweepGrid(sizes=(13,), h_values=(1e-2, 1e-3))
        with self.assertRaises(ValueError):
            SweepGrid(sizes=(13,), h_values=(1e-3,), n_samples=0)
        SweepGrid(sizes=(100,), h_values=(1e-3,), omega=0.618)

    def test_log_spaced(self):
        np.testing.assert_allclose(log_spaced(-2, 0, 2), [1e-2, 10 ** -1.5, 1e-1, 10 ** -0.5, 1.0])


def test_single_sample_matches_direct_evaluation():
    point = SweepPoint(L=21, delta=0.0, h=1e-2)
    record = average_point(point, n_samples=1, master_seed=5)
    phi = sample_phase(5, point_id(21, 0.0, 1e-2), 0)
    direct = observe(point.with_phase(phi))
    assert record.zeta.mean == direct.zeta
    assert record.zeta.stderr == 0.0
    assert record.gap.mean == direct.gap


def test_no_aa_term_gives_zero_spread():
    record = average_point(SweepPoint(L=13, delta=-2.0, h=0.1), n_samples=5, master_seed=1)
    for name in ("zeta", "ipr", "gap"):
        assert record.stats[name].stderr == 0.0


def test_small_grid_yields_one_record_per_point():
    grid = SweepGrid(sizes=(13,), h_values=(1e-3, 1e-2, 1e-1), n_samples=1)
    records = run_sweep(grid)
    assert len(records) == 3
    assert [record.point.h for record in records] == [1e-3, 1e-2, 1e-1]
    assert not any(record.failed for record in records)


def test_averaged_zeta_decays_with_field_beyond_the_plateau():
    h_values = tuple(10.0 ** exponent for exponent in range(-6, 1))
    records = run_sweep(SweepGrid(sizes=(89,), h_values=h_values, n_samples=100, master_seed=4))
    zeta = [record.zeta.mean for record in records]
    assert all(later <= earlier for earlier, later in zip(zeta, zeta[1:])), zeta


def test_sweep_is_deterministic_and_independent_of_workers():
    grid = SweepGrid(sizes=(13, 21), h_values=(1e-3, 1e-1), deltas=(0.0, -0.2), n_samples=7, master_seed=9)
    serial = run_sweep(grid, chunk_size=3)
    again = run_sweep(grid, chunk_size=7)
    with parallel_backend("threading"):
        threaded = run_sweep(grid, n_jobs=3, chunk_size=2)
    assert [record.stats for record in serial] == [record.stats for record in again]
    assert [record.stats for record in serial] == [record.stats for record in threaded]


def test_point_result_does_not_depend_on_grid_composition():
    point = SweepPoint(L=13, delta=0.0, h=1e-2)
    alone = average_point(point, n_samples=4, master_seed=3)
    grid = SweepGrid(sizes=(13,), h_values=(1e-3, 1e-2), n_samples=4, master_seed=3)
    in_grid = [record for record in run_sweep(grid) if record.point == point]
    assert in_grid[0].stats == alone.stats


def test_reruns_agree_within_statistical_error():
    point = SweepPoint(L=144, delta=0.0, h=1e-2)
    first = average_point(point, n_samples=500, master_seed=1).zeta
    second = average_point(point, n_samples=500, master_seed=2).zeta
    assert first.mean != second.mean
    assert abs(first.mean - second.mean) <= 4.0 * math.hypot(first.stderr, second.stderr)


def test_failing_point_is_kept_and_flagged(mocker):
    def flaky(params, observables, delta_ref=None):
        if params.h == 1e-2:
            raise EigensolverError("no convergence", index=4)
        return observe(params, observables, delta_ref=delta_ref)

    mocker.patch.object(ensemble, "observe", side_effect=flaky)
    grid = SweepGrid(sizes=(13,), h_values=(1e-3, 1e-2, 1e-1), n_samples=2)
    records = run_sweep(grid)
    assert [record.failed for record in records] == [False, True, False]
    assert "h=0.01" in records[1].error
    assert math.isnan(records[1].zeta.mean)
    with pytest.raises(NumericalError):
        average_point(SweepPoint(L=13, delta=0.0, h=1e-2), n_samples=2, master_seed=0)


def test_fidelity_against_itself():
    stat = average_fidelity(SweepPoint(L=21, delta=-2.0, h=1e-3), n_samples=3, master_seed=0)
    assert stat.mean == 1.0
    assert stat.stderr == 0.0


def test_fidelity_map_layout():
    records = run_fidelity_map(21, deltas=(-0.5, -2.0), h_values=(1e-3, 1e-1), n_samples=2, master_seed=0)
    assert [(record.point.delta, record.point.h) for record in records] == [
        (-2.0, 1e-3), (-2.0, 1e-1), (-0.5, 1e-3), (-0.5, 1e-1)]
    assert all(0.0 <= record.fidelity.mean <= 1.0 for record in records)
    assert records[0].fidelity.mean == 1.0


if __name__ == '__main__':
    unittest.main()
