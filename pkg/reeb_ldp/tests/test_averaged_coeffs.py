import numpy as np
from django.test import SimpleTestCase

from ..analysis.averaged_coeffs import (
    coeff_lookup,
    compute_coeffs,
    edge_seed,
    flow_time_coeffs,
    lipschitz_constant,
    rotation_time_limit,
    tabulate_edge,
    trace_level_curve,
)
from ..errors import BadKind, GuardBand, OutOfSpan
from .helpers import graph, system, tables


class HarmonicCoefficientTests(SimpleTestCase):
    def setUp(self):
        self.table = tables('harmonic')[0]

    def test_closed_forms(self):
        h = np.linspace(0.1, 4.0, 40)
        np.testing.assert_allclose(self.table.t(h), 2 * np.pi, rtol=1e-5)
        np.testing.assert_allclose(self.table.b2(h), 2 * h, rtol=1e-5)

    def test_grid_values(self):
        np.testing.assert_allclose(self.table.t_values, 2 * np.pi, rtol=1e-5)
        np.testing.assert_allclose(self.table.b2_values / self.table.h_grid, 2.0, rtol=1e-5)

    def test_open_end_is_truncated_inside_the_box(self):
        lo, hi = self.table.span
        self.assertEqual(self.table.lo_end, 'extremum')
        self.assertEqual(self.table.hi_end, 'open')
        self.assertAlmostEqual(hi, 0.98 * 4.5, places=4)
        self.assertEqual(self.table.h_grid[-1], hi)

    def test_lookup_at_the_extremum(self):
        sample = coeff_lookup(self.table, 0.0)
        self.assertEqual(sample.b2, 0.0)
        self.assertAlmostEqual(sample.t, 2 * np.pi)
        with self.assertRaises(OutOfSpan):
            coeff_lookup(self.table, 4.45)

    def test_lipschitz_constant_of_t_b2(self):
        # T B^2 = 4 pi h
        self.assertAlmostEqual(lipschitz_constant(self.table, 0.5, 2.0), 4 * np.pi, delta=2e-2)
        with self.assertRaises(OutOfSpan):
            lipschitz_constant(self.table, 0.0, 1.0)

    def test_traced_circle(self):
        s, g = system('harmonic'), graph('harmonic')
        curve = trace_level_curve(s, g, 0, 1.0)
        self.assertAlmostEqual(curve.length, 2 * np.pi * np.sqrt(2), places=6)
        self.assertLess(curve.residual, 1e-8)
        coeffs = compute_coeffs(s, curve)
        self.assertAlmostEqual(coeffs.t, 2 * np.pi, places=6)
        self.assertAlmostEqual(coeffs.b2, 2.0, places=6)
        self.assertTrue(curve.contains((0.0, 0.0)))
        self.assertFalse(curve.contains((1.5, 0.0)))

    def test_rotation_time_limit(self):
        minimum = graph('harmonic').vertices[0].critical
        self.assertAlmostEqual(rotation_time_limit(system('harmonic'), minimum), 2 * np.pi)

    def test_small_grids_are_rejected(self):
        with self.assertRaises(ValueError):
            tabulate_edge(system('harmonic'), graph('harmonic'), 0, n_interior=8)


class DoubleWellCoefficientTests(SimpleTestCase):
    def setUp(self):
        self.s, self.g = system('doublewell'), graph('doublewell')

    def test_matches_time_parametrized_orbit(self):
        curve = trace_level_curve(self.s, self.g, 0, 0.1)
        traced = compute_coeffs(self.s, curve)
        flown = flow_time_coeffs(self.s, edge_seed(self.s, self.g, 0, 0.1))
        self.assertAlmostEqual(traced.t / flown.t, 1.0, delta=1e-5)
        self.assertAlmostEqual(traced.b2 / flown.b2, 1.0, delta=1e-5)

    def test_refinement_does_not_move_the_coefficients(self):
        curve = trace_level_curve(self.s, self.g, 2, 0.6)
        coarse = compute_coeffs(self.s, curve)
        fine = compute_coeffs(self.s, curve.with_resolution(self.s, 2 * len(curve.points)))
        self.assertAlmostEqual(coarse.t, fine.t, delta=1e-7 * coarse.t)
        self.assertAlmostEqual(coarse.b2, fine.b2, delta=1e-7 * coarse.b2)

    def test_guard_band_near_the_saddle(self):
        with self.assertRaises(GuardBand):
            trace_level_curve(self.s, self.g, 0, 0.25 - 1e-9)

    def test_rotation_time_grows_logarithmically_at_the_saddle(self):
        table = tabulate_edge(self.s, self.g, 0)
        self.assertEqual(table.hi_end, 'saddle')
        fit = table.saddle_fits['hi']
        self.assertGreater(fit['b'], 0.0)
        self.assertGreater(fit['r2'], 0.99)
        near, far = table.t(0.25 - 1e-3), table.t(0.25 - 1e-2)
        self.assertGreater(near, far)
        self.assertEqual(float(table.b2(0.25)), 0.0)
        self.assertGreater(float(table.b2(0.25 - 1e-3)), 0.0)

    def test_saddle_has_no_rotation_limit(self):
        saddle = self.g.vertices[2].critical
        with self.assertRaises(BadKind):
            rotation_time_limit(self.s, saddle)
