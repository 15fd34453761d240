import unittest

import numpy as np
import pandas as pd
import pytest

from aas_lab.errors import CollapseError, FitError
from aas_lab.scaling import (
    AnsatzKind,
    ExponentGrid,
    ScalingAnsatz,
    ScalingData,
    bracketing_grid,
    collapse_search,
    cost_function,
    exponent_drift,
    fit_power_law,
    hybrid_kappa_prediction,
    kappa_collapse,
    qfi_scaling,
    size_independent_window,
    two_param_collapse,
)

SIZES = (55, 144, 377, 987)


def master_curve(key):
    return 1.0 / (1.0 + np.sqrt(key))


def synthetic(kind, exponent, fixed=None, sizes=SIZES, deltas=(0.0,), points=1000, decades=(-6.0, -1.0),
              seed=0, delta_of_size=None):
    """Exact-ansatz data: the rescaled observable is master_curve(key) at the given exponent."""
    rng = np.random.default_rng(seed)
    L, delta, h = [], [], []
    for size in sizes:
        for value in deltas:
            L.append(np.full(points, size, dtype=float))
            delta.append(np.full(points, value if delta_of_size is None else delta_of_size(size)))
            h.append(np.sort(10.0 ** rng.uniform(decades[0], decades[1], points)))
    placeholder = ScalingData(L=np.concatenate(L), delta=np.concatenate(delta), h=np.concatenate(h),
                              value=np.ones(len(sizes) * len(deltas) * points))
    ansatz = ScalingAnsatz(kind, fixed or {})
    _, key = ansatz.transform(placeholder, exponent)
    q = master_curve(key)
    base = {AnsatzKind.ZETA_2PARAM: AnsatzKind.ZETA}.get(ansatz.kind, ansatz.kind)
    if base in (AnsatzKind.ZETA, AnsatzKind.KAPPA):
        value = q * placeholder.L
    elif base is AnsatzKind.IPR:
        value = q / placeholder.L ** (exponent / ansatz.fixed_exponents["nu"])
    else:
        value = q / placeholder.L ** exponent
    return ScalingData(L=placeholder.L, delta=placeholder.delta, h=placeholder.h, value=value)


class CostFunctionTestCase(unittest.TestCase):

    def test_hand_computed_value(self):
        self.assertAlmostEqual(cost_function([1.0, 3.0, 2.0, 4.0], [0.0, 1.0, 2.0, 3.0]), 2.0 / 3.0, places=14)

    def test_monotone_is_exactly_zero(self):
        self.assertEqual(cost_function([0.1, 0.2, 0.35, 0.9], [1.0, 2.0, 3.0, 4.0]), 0.0)
        self.assertEqual(cost_function([5.0, 4.0, 1.0], [0.1, 0.2, 0.3]), 0.0)

    def test_sorting_is_internal(self):
        values = [1.0, 3.0, 2.0, 4.0]
        keys = [0.0, 1.0, 2.0, 3.0]
        order = [2, 0, 3, 1]
        shuffled = cost_function([values[i] for i in order], [keys[i] for i in order])
        self.assertEqual(shuffled, cost_function(values, keys))

    def test_affine_invariance(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            n = int(rng.integers(3, 50))
            values = rng.normal(size=n)
            keys = rng.random(n)
            scale = rng.uniform(0.1, 10.0) * rng.choice([-1.0, 1.0])
            shift = rng.normal()
            self.assertAlmostEqual(cost_function(values, keys), cost_function(scale * values + shift, keys),
                                   places=9)

    def test_non_negative(self):
        rng = np.random.default_rng(5)
        for _ in range(20):
            self.assertGreaterEqual(cost_function(rng.normal(size=30), rng.random(30)), 0.0)

    def test_tied_keys_follow_the_trend(self):
        keys = [3.0, 1.0, 2.0, 1.0, 3.0, 2.0]
        self.assertEqual(cost_function([1.0, 6.0, 3.0, 5.0, 2.0, 4.0], keys), 0.0)
        self.assertEqual(cost_function([6.0, 1.0, 4.0, 2.0, 5.0, 3.0], keys), 0.0)

    def test_tied_keys_independent_of_input_order(self):
        values = np.array([4.0, 1.0, 3.0, 2.0, 0.5, 5.0])
        keys = np.array([1.0, 1.0, 2.0, 2.0, 3.0, 3.0])
        expected = cost_function(values, keys)
        rng = np.random.default_rng(11)
        for _ in range(20):
            order = rng.permutation(values.size)
            self.assertEqual(cost_function(values[order], keys[order]), expected)

    def test_degenerate_inputs(self):
        with self.assertRaises(ValueError):
            cost_function([1.0, 1.0, 1.0], [0.0, 1.0, 2.0])
        with self.assertRaises(ValueError):
            cost_function([1.0], [0.0])
        with self.assertRaises(ValueError):
            cost_function([1.0, 2.0], [0.0])


class FitPowerLawTestCase(unittest.TestCase):

    def setUp(self):
        self.xs = np.logspace(-3, 0, 13)

    def test_square_root(self):
        fit = fit_power_law(self.xs, self.xs ** 0.5)
        self.assertAlmostEqual(fit.exponent, 0.5, places=10)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=10)
        self.assertGreaterEqual(fit.stderr, 0.0)
        self.assertEqual(fit.window, (self.xs[0], self.xs[-1]))
        self.assertEqual(fit.n_points, 13)

    def test_prefactor_and_rescaled_x(self):
        ys = 2.5 * self.xs ** -0.3
        reference = fit_power_law(self.xs, ys).exponent
        self.assertAlmostEqual(fit_power_law(self.xs, 7.0 * ys).exponent, reference, places=10)
        self.assertAlmostEqual(fit_power_law(4.0 * self.xs, ys).exponent, reference, places=10)

    def test_preconditions(self):
        with self.assertRaises(FitError):
            fit_power_law([1.0, 2.0], [1.0, 2.0])
        with self.assertRaises(FitError):
            fit_power_law([1.0, 2.0, 3.0], [1.0, 0.0, 2.0])
        with self.assertRaises(FitError):
            fit_power_law([2.0, 2.0, 2.0], [1.0, 2.0, 3.0])


class AnsatzTestCase(unittest.TestCase):

    def test_missing_fixed_exponent(self):
        with self.assertRaises(ValueError):
            ScalingAnsatz(AnsatzKind.IPR)
        with self.assertRaises(ValueError):
            ScalingAnsatz(AnsatzKind.KAPPA, {"nu_c": 0.3})

    def test_searched_exponent_and_observable(self):
        self.assertEqual(ScalingAnsatz(AnsatzKind.ZETA).searched, "nu")
        self.assertEqual(ScalingAnsatz(AnsatzKind.GAP, {"nu": 0.3}).searched, "z")
        self.assertEqual(ScalingAnsatz(AnsatzKind.IPR_2PARAM, {"nu": 0.3, "nu_delta": 1.0, "c": 1.0}).observable,
                         "ipr")
        self.assertEqual(ScalingAnsatz("kappa", {"nu_c": 0.3, "nu_delta": 1.0}).observable, "zeta")

    def test_zeta_transform(self):
        data = ScalingData(L=[4.0], delta=[0.0], h=[0.5], value=[2.0])
        q, key = ScalingAnsatz(AnsatzKind.ZETA).transform(data, 0.5)
        np.testing.assert_allclose(q, [0.5])
        np.testing.assert_allclose(key, [8.0])

    def test_from_frame_picks_up_stderr(self):
        frame = pd.DataFrame({"L": [13, 21], "delta": [0.0, 0.0], "h": [0.1, 0.1],
                              "zeta_mean": [1.0, 2.0], "zeta_stderr": [0.1, 0.2]})
        data = ScalingData.from_frame(frame, "zeta_mean")
        np.testing.assert_array_equal(data.stderr, [0.1, 0.2])
        self.assertEqual(data.sizes, [13, 21])


class CollapseSearchTestCase(unittest.TestCase):

    def test_recovers_nu(self):
        data = synthetic(AnsatzKind.ZETA, 0.3)
        result = collapse_search(data, ScalingAnsatz(AnsatzKind.ZETA), ExponentGrid(0.2, 0.4, 0.005))
        self.assertEqual(result.min_cost, 0.0)
        self.assertAlmostEqual(result.reported, 0.3, delta=0.005)
        self.assertLessEqual(result.flat_window[0], result.best_exponent)
        self.assertLessEqual(result.best_exponent, result.flat_window[1])
        self.assertTrue(all(cost >= 0.0 for _, cost in result.curve))

    def test_recovers_s(self):
        ansatz = ScalingAnsatz(AnsatzKind.IPR, {"nu": 0.3})
        data = synthetic(AnsatzKind.IPR, 0.1, {"nu": 0.3})
        result = collapse_search(data, ansatz, ExponentGrid(0.0, 0.3, 0.005))
        self.assertAlmostEqual(result.reported, 0.1, delta=0.005)
        self.assertEqual(result.exponent_name, "s")

    def test_recovers_z(self):
        ansatz = ScalingAnsatz(AnsatzKind.GAP, {"nu": 0.3})
        data = synthetic(AnsatzKind.GAP, 2.0, {"nu": 0.3})
        result = collapse_search(data, ansatz, ExponentGrid(1.8, 2.2, 0.005))
        self.assertAlmostEqual(result.reported, 2.0, delta=0.005)

    def test_input_order_is_irrelevant(self):
        data = synthetic(AnsatzKind.ZETA, 0.3, points=300)
        order = np.random.default_rng(1).permutation(len(data))
        shuffled = ScalingData(L=data.L[order], delta=data.delta[order], h=data.h[order], value=data.value[order])
        grid = ExponentGrid(0.2, 0.4, 0.01)
        ansatz = ScalingAnsatz(AnsatzKind.ZETA)
        self.assertEqual(collapse_search(data, ansatz, grid).curve, collapse_search(shuffled, ansatz, grid).curve)

    def test_parallel_grid_matches_serial(self):
        data = synthetic(AnsatzKind.ZETA, 0.3, points=200)
        grid = ExponentGrid(0.2, 0.4, 0.01)
        ansatz = ScalingAnsatz(AnsatzKind.ZETA)
        self.assertEqual(collapse_search(data, ansatz, grid, n_jobs=3).curve,
                         collapse_search(data, ansatz, grid, n_jobs=1).curve)

    def test_minimum_at_grid_edge(self):
        data = synthetic(AnsatzKind.ZETA, 0.3)
        with self.assertRaises(CollapseError):
            collapse_search(data, ScalingAnsatz(AnsatzKind.ZETA), ExponentGrid(0.31, 0.45, 0.005))

    def test_grid_too_narrow(self):
        data = synthetic(AnsatzKind.ZETA, 0.3, points=100)
        with self.assertRaises(CollapseError):
            collapse_search(data, ScalingAnsatz(AnsatzKind.ZETA), ExponentGrid(0.28, 0.32, 0.001))

    def test_too_few_sizes(self):
        data = synthetic(AnsatzKind.ZETA, 0.3, sizes=(55, 144), points=100)
        with self.assertRaises(CollapseError):
            collapse_search(data, ScalingAnsatz(AnsatzKind.ZETA), ExponentGrid(0.2, 0.4, 0.005))

    def test_too_few_points_per_curve(self):
        data = synthetic(AnsatzKind.ZETA, 0.3, points=2)
        with self.assertRaises(CollapseError):
            collapse_search(data, ScalingAnsatz(AnsatzKind.ZETA), ExponentGrid(0.2, 0.4, 0.005))

    def test_bracketing_grid_centres_on_minimum(self):
        data = synthetic(AnsatzKind.ZETA, 0.3)
        grid = bracketing_grid(data, ScalingAnsatz(AnsatzKind.ZETA))
        self.assertAlmostEqual(grid.start, 0.2, places=9)
        self.assertAlmostEqual(grid.stop, 0.4, places=9)
        self.assertEqual(grid.step, 0.001)


class TwoParameterTestCase(unittest.TestCase):

    def test_fixed_scaling_variable(self):
        ansatz = ScalingAnsatz(AnsatzKind.ZETA_2PARAM, {"nu_delta": 1.0, "c": 1.0})
        data = synthetic(AnsatzKind.ZETA_2PARAM, 0.3, {"nu_delta": 1.0, "c": 1.0},
                         delta_of_size=lambda size: 1.0 * size ** -1.0)
        result = two_param_collapse(data, ansatz, ExponentGrid(0.2, 0.4, 0.005))
        self.assertAlmostEqual(result.reported, 0.3, delta=0.005)

    def test_zero_c_reduces_to_single_parameter(self):
        data = synthetic(AnsatzKind.ZETA, 0.3, points=300)
        grid = ExponentGrid(0.2, 0.4, 0.005)
        two = two_param_collapse(data, ScalingAnsatz(AnsatzKind.ZETA_2PARAM, {"nu_delta": 1.0, "c": 0.0}), grid)
        one = collapse_search(data, ScalingAnsatz(AnsatzKind.ZETA), grid)
        self.assertEqual(two.curve, one.curve)
        self.assertEqual(two.reported, one.reported)

    def test_inconsistent_delta(self):
        data = synthetic(AnsatzKind.ZETA, 0.3, points=50)
        with self.assertRaises(ValueError):
            two_param_collapse(data, ScalingAnsatz(AnsatzKind.ZETA_2PARAM, {"nu_delta": 1.0, "c": 1.0}))

    def test_requires_two_parameter_ansatz(self):
        data = synthetic(AnsatzKind.ZETA, 0.3, points=50)
        with self.assertRaises(ValueError):
            two_param_collapse(data, ScalingAnsatz(AnsatzKind.ZETA))


class KappaTestCase(unittest.TestCase):
    FIXED = {"nu_c": 0.3, "nu_delta": 1.0}
    DELTAS = (-0.1, -0.2, -0.3, -0.4, -0.5)

    def test_recovers_kappa(self):
        data = synthetic(AnsatzKind.KAPPA, -0.4, self.FIXED, sizes=(377,), deltas=self.DELTAS, points=1500,
                         decades=(-4.0, -2.0))
        result = kappa_collapse(data, 0.3, 1.0, ExponentGrid(-0.6, -0.2, 0.005))
        self.assertAlmostEqual(result.reported, -0.4, delta=0.005)
        self.assertEqual(result.exponent_name, "kappa")

    def test_single_variable_data_gives_zero(self):
        data = synthetic(AnsatzKind.KAPPA, 0.0, self.FIXED, sizes=(377,), deltas=self.DELTAS, points=1500,
                         decades=(-4.0, -2.0))
        result = kappa_collapse(data, 0.3, 1.0, ExponentGrid(-0.2, 0.2, 0.005))
        self.assertAlmostEqual(result.reported, 0.0, delta=0.005)

    def test_preconditions(self):
        several_sizes = synthetic(AnsatzKind.KAPPA, -0.4, self.FIXED, sizes=(233, 377), deltas=self.DELTAS,
                                  points=20)
        with self.assertRaises(CollapseError):
            kappa_collapse(several_sizes, 0.3, 1.0)
        few_deltas = synthetic(AnsatzKind.KAPPA, -0.4, self.FIXED, sizes=(377,), deltas=(-0.1, -0.2, -0.3),
                               points=20)
        with self.assertRaises(CollapseError):
            kappa_collapse(few_deltas, 0.3, 1.0)

    def test_prediction(self):
        self.assertEqual(hybrid_kappa_prediction(1.0, 0.5, 0.25), -2.0)
        predicted = hybrid_kappa_prediction(1.0, 0.335, 0.292)
        self.assertAlmostEqual(predicted, -0.4396, places=3)
        self.assertLessEqual(abs(predicted - (-0.418)), 0.03)


class WindowAndQfiTestCase(unittest.TestCase):

    def test_size_independent_tail(self):
        h = np.logspace(-4, 0, 9)
        small = h ** -0.3
        large = small.copy()
        large[:4] += 1.0
        data = ScalingData(L=np.r_[np.full(9, 89.0), np.full(9, 144.0)], delta=np.zeros(18), h=np.r_[h, h],
                           value=np.r_[small, large], stderr=np.zeros(18))
        self.assertEqual(size_independent_window(data), (h[4], h[8]))

    def test_stderr_widens_agreement(self):
        h = np.logspace(-4, 0, 9)
        small = h ** -0.3
        large = small * 1.01
        data = ScalingData(L=np.r_[np.full(9, 89.0), np.full(9, 144.0)], delta=np.zeros(18), h=np.r_[h, h],
                           value=np.r_[small, large], stderr=np.r_[small, large] * 0.01)
        self.assertEqual(size_independent_window(data), (h[0], h[8]))

    def test_no_tail(self):
        h = np.logspace(-4, 0, 9)
        data = ScalingData(L=np.r_[np.full(9, 89.0), np.full(9, 144.0)], delta=np.zeros(18), h=np.r_[h, h],
                           value=np.r_[h, 2.0 * h])
        with self.assertRaises(FitError):
            size_independent_window(data)

    def test_qfi_exponent(self):
        sizes = np.array([21, 34, 55, 89])
        result = qfi_scaling(sizes, 3.0 * sizes ** 6.7, nu=0.3)
        self.assertAlmostEqual(result.beta, 6.7, places=9)
        self.assertAlmostEqual(result.predicted_beta, 2.0 / 0.3)

    def test_qfi_needs_three_sizes(self):
        with self.assertRaises(FitError):
            qfi_scaling([144], [1e10])
        with self.assertRaises(FitError):
            qfi_scaling([144, 233], [1e10, 1e11])


def test_exponent_drift_reports_each_delta():
    fixed = {"nu": 0.3}
    good = {
        "zeta": synthetic(AnsatzKind.ZETA, 0.3, deltas=(-0.1,)),
        "ipr": synthetic(AnsatzKind.IPR, 0.1, fixed, deltas=(-0.1,)),
        "gap": synthetic(AnsatzKind.GAP, 2.0, fixed, deltas=(-0.1,)),
    }
    sparse = {name: synthetic(kind, exponent, extra, sizes=(55, 144), deltas=(-0.2,), points=50)
              for name, kind, exponent, extra in (("zeta", AnsatzKind.ZETA, 0.3, None),
                                                  ("ipr", AnsatzKind.IPR, 0.1, fixed),
                                                  ("gap", AnsatzKind.GAP, 2.0, fixed))}

    def merged(name):
        a, b = good[name], sparse[name]
        return ScalingData(L=np.r_[a.L, b.L], delta=np.r_[a.delta, b.delta], h=np.r_[a.h, b.h],
                           value=np.r_[a.value, b.value])

    tables = {name: merged(name) for name in ("zeta", "ipr", "gap")}
    grids = {"nu": ExponentGrid(0.2, 0.4, 0.005), "s": ExponentGrid(0.0, 0.3, 0.005),
             "z": ExponentGrid(1.8, 2.2, 0.005)}
    rows = exponent_drift(tables, grids=grids)
    assert [row.delta for row in rows] == [-0.1, -0.2]
    assert rows[0].error is None
    assert rows[0].nu == pytest.approx(0.3, abs=0.005)
    assert rows[0].s == pytest.approx(0.1, abs=0.005)
    assert rows[0].s_over_nu == pytest.approx(1.0 / 3.0, abs=0.02)
    assert rows[0].z == pytest.approx(2.0, abs=0.005)
    assert rows[1].error is not None
    assert np.isnan(rows[1].nu)


if __name__ == '__main__':
    unittest.main()
