import numpy as np
from django.test import SimpleTestCase

from lab.exceptions import InputError
from lab.schedulers import (
    Schedule, ScheduleKind, Variant, area_under_curve, classify_schedule, gamma_heuristic,
    regularization_weight, retain_probability, schedule_curve, steps_per_epoch, switch_step_for_epoch,
)

CURRICULUM_VARIANTS = (Variant.EXP_CURRICULUM, Variant.POLYNOMIAL, Variant.POWER_EXPONENT, Variant.SWITCH)


class ScheduleExactnessTests(SimpleTestCase):

    def test_starts_at_one_and_ends_near_floor(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            theta_bar = float(rng.uniform(0.05, 1.0))
            total = int(rng.integers(1, 100_000))
            s = Schedule(Variant.EXP_CURRICULUM, theta_bar, total, gamma=gamma_heuristic(total))
            self.assertEqual(retain_probability(s, 0), 1.0)
            self.assertLess(abs(retain_probability(s, total) - theta_bar), 1e-4)

    def test_gamma_heuristic(self):
        self.assertAlmostEqual(gamma_heuristic(1000), 0.01)
        s = Schedule(Variant.EXP_CURRICULUM, 0.5, 1000)
        self.assertAlmostEqual(s.gamma, 0.01)

    def test_never_leaves_floor_to_one(self):
        ts = np.linspace(0, 4000, 997)
        for variant in Variant:
            s = Schedule(variant, 0.3, 2000, switch_step=700)
            theta = schedule_curve(s, ts)
            self.assertTrue(np.all(theta >= 0.3), variant)
            self.assertTrue(np.all(theta <= 1.0), variant)

    def test_polynomial_reaches_floor_at_four_fifths(self):
        s = Schedule(Variant.POLYNOMIAL, 0.5, 1000, delta=2)
        self.assertAlmostEqual(retain_probability(s, 800), 0.5, places=12)
        self.assertEqual(retain_probability(s, 1000), 0.5)
        self.assertAlmostEqual(retain_probability(s, 400), 1.0 - 0.5 / 4, places=12)

    def test_switch_is_a_step(self):
        s = Schedule(Variant.SWITCH, 0.5, 1000, switch_step=300)
        self.assertEqual(retain_probability(s, 299), 1.0)
        self.assertEqual(retain_probability(s, 300), 0.5)

    def test_linear_anti_rises_to_one(self):
        s = Schedule(Variant.LINEAR_ANTI, 0.5, 1000)
        self.assertEqual(retain_probability(s, 0), 0.5)
        self.assertAlmostEqual(retain_probability(s, 500), 0.75)
        self.assertEqual(retain_probability(s, 5000), 1.0)

    def test_constant_is_flat(self):
        s = Schedule(Variant.CONSTANT, 0.5, 1000)
        np.testing.assert_array_equal(schedule_curve(s, [0, 10, 999]), [0.5, 0.5, 0.5])

    def test_scalar_returns_float(self):
        s = Schedule(Variant.EXP_CURRICULUM, 0.5, 100)
        self.assertIsInstance(retain_probability(s, 3), float)
        self.assertEqual(retain_probability(s, np.arange(4)).shape, (4,))

    def test_rejects_bad_parameters(self):
        with self.assertRaises(InputError):
            Schedule(Variant.EXP_CURRICULUM, 0.0, 100)
        with self.assertRaises(InputError):
            Schedule(Variant.EXP_CURRICULUM, 1.2, 100)
        with self.assertRaises(InputError):
            Schedule(Variant.EXP_CURRICULUM, 0.5, 0)
        with self.assertRaises(InputError):
            Schedule(Variant.POWER_EXPONENT, 0.5, 100, alpha=1)
        with self.assertRaises(InputError):
            retain_probability(Schedule(Variant.CONSTANT, 0.5, 100), -1)


class RegularizationWeightTests(SimpleTestCase):

    def test_weight_grows_for_curricula_above_half(self):
        ts = np.linspace(0, 3000, 1000)
        for variant in CURRICULUM_VARIANTS:
            for theta_bar in (0.5, 0.6, 0.8):
                s = Schedule(variant, theta_bar, 3000, switch_step=1000)
                theta = schedule_curve(s, ts)
                weight = theta * (1.0 - theta)
                self.assertTrue(np.all(np.diff(weight) >= -1e-15), (variant, theta_bar))

    def test_weight_values(self):
        self.assertEqual(regularization_weight(1.0), 0.0)
        self.assertEqual(regularization_weight(0.5), 0.25)
        with self.assertRaises(InputError):
            regularization_weight(0.0)


class ClassificationTests(SimpleTestCase):
    grid = np.linspace(0, 1000, 21)

    def test_curricula(self):
        for variant in CURRICULUM_VARIANTS:
            s = Schedule(variant, 0.5, 1000, switch_step=400)
            self.assertIs(classify_schedule(s, self.grid).kind, ScheduleKind.CURRICULUM, variant)

    def test_anti_and_constant(self):
        anti = classify_schedule(Schedule(Variant.LINEAR_ANTI, 0.5, 1000), self.grid)
        self.assertIs(anti.kind, ScheduleKind.ANTI_CURRICULUM)
        flat = classify_schedule(Schedule(Variant.CONSTANT, 0.5, 1000), self.grid)
        self.assertIs(flat.kind, ScheduleKind.CONSTANT)

    def test_evidence_lists_conditions(self):
        result = classify_schedule(Schedule(Variant.EXP_CURRICULUM, 0.5, 1000), self.grid)
        self.assertTrue(all(holds for _, holds in result.evidence))

    def test_refining_the_grid_keeps_the_kind(self):
        grids = [np.linspace(0, 1000, points) for points in (11, 101, 1001)]
        for variant in Variant:
            s = Schedule(variant, 0.5, 1000, switch_step=400)
            kinds = {classify_schedule(s, grid).kind for grid in grids}
            self.assertEqual(len(kinds), 1, (variant, kinds))

    def test_unsorted_grid(self):
        with self.assertRaises(InputError):
            classify_schedule(Schedule(Variant.CONSTANT, 0.5, 10), [5, 1])


class CurveShapeTests(SimpleTestCase):

    def test_exponential_drops_earliest(self):
        exp = area_under_curve(Schedule(Variant.EXP_CURRICULUM, 0.5, 1000))
        poly = area_under_curve(Schedule(Variant.POLYNOMIAL, 0.5, 1000))
        power = area_under_curve(Schedule(Variant.POWER_EXPONENT, 0.5, 1000))
        self.assertLess(exp, poly)
        self.assertLess(exp, power)
        self.assertAlmostEqual(area_under_curve(Schedule(Variant.CONSTANT, 0.5, 1000)), 0.5)

    def test_switch_epoch_to_step(self):
        self.assertEqual(steps_per_epoch(6000, 128), 47)
        self.assertEqual(switch_step_for_epoch(10, 6000, 128), 470)
        self.assertEqual(switch_step_for_epoch(10, 60000, 128), 4690)

    def test_with_floor_keeps_shape(self):
        s = Schedule(Variant.EXP_CURRICULUM, 0.5, 1000)
        other = s.with_floor(0.8)
        self.assertEqual(other.gamma, s.gamma)
        self.assertEqual(other.theta_bar, 0.8)
        self.assertEqual(other(0), 1.0)
