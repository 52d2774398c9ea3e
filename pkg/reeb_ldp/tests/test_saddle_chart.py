import numpy as np
from django.test import SimpleTestCase

from ..analysis.hamiltonian_field import CriticalPoint
from ..errors import BadKind, OutsideChart
from ..simulation.saddle_chart import (
    build_saddle_chart,
    exit_time_ode,
    log_bound_check,
    sample_transit_points,
    transit_derivative_bounds,
    transit_time,
)
from .helpers import graph, system


class CanonicalSaddleTests(SimpleTestCase):
    def setUp(self):
        saddle = CriticalPoint((0.0, 0.0), 0.0, 'saddle', (-2.0, 2.0))
        self.chart = build_saddle_chart(system('canonical_saddle'), saddle)

    def test_chart_is_the_identity(self):
        _, _, w = self.chart.grid(9)
        np.testing.assert_allclose(self.chart.psi(w), w, atol=1e-14)
        self.assertFalse(self.chart.orientation_flipped)
        self.assertAlmostEqual(self.chart.det_j(np.array([0.3, -0.2])), 1.0, places=8)
        self.assertLess(self.chart.residual, 1e-12)

    def test_transit_time_closed_form(self):
        self.assertAlmostEqual(transit_time(self.chart, 0.05, 0.0), 0.5 * np.arcsinh(5.0), delta=1e-6)
        self.assertAlmostEqual(exit_time_ode(self.chart, 0.05, 0.0), 0.5 * np.arcsinh(5.0), delta=1e-6)

    def test_outside_transit_domain(self):
        with self.assertRaises(OutsideChart):
            transit_time(self.chart, 0.1, 0.2)
        with self.assertRaises(OutsideChart):
            transit_time(self.chart, -0.1, 0.0)

    def test_log_bound(self):
        report = log_bound_check(self.chart, n_samples=50, seed=3)
        self.assertTrue(report.passed)
        self.assertEqual(report.violations, 0)
        self.assertLessEqual(report.max_ratio, 1.0)

    def test_derivatives_blow_up_no_faster_than_one_over_g(self):
        samples = sample_transit_points(self.chart, 10, seed=4)
        report = transit_derivative_bounds(self.chart, samples)
        self.assertTrue(report.passed)
        self.assertLess(report.c_min, 10.0)


class DoubleWellSaddleTests(SimpleTestCase):
    def setUp(self):
        self.s = system('doublewell')
        self.saddle = graph('doublewell').vertices[2].critical
        self.chart = build_saddle_chart(self.s, self.saddle)

    def test_normal_form_identity(self):
        _, _, w = self.chart.grid(17)
        h = self.s.h(self.chart.psi(w))
        np.testing.assert_allclose(h, 0.25 + w[..., 0] ** 2 - w[..., 1] ** 2, atol=1e-8)
        self.assertGreater(np.min(self.chart.det_j(w.reshape(-1, 2)[:5])), 0.0)

    def test_inverse(self):
        w = np.array([0.1, -0.05])
        np.testing.assert_allclose(self.chart.inverse(self.chart.psi(w)), w, atol=1e-10)

    def test_transit_time_matches_the_flow(self):
        for mu, nu in sample_transit_points(self.chart, 3, seed=5):
            quadrature = transit_time(self.chart, mu, nu)
            flown = exit_time_ode(self.chart, mu, nu)
            self.assertAlmostEqual(quadrature / flown, 1.0, delta=1e-4)

    def test_chart_needs_a_saddle(self):
        with self.assertRaises(BadKind):
            build_saddle_chart(self.s, graph('doublewell').vertices[0].critical)
        with self.assertRaises(ValueError):
            build_saddle_chart(self.s, self.saddle, l=1.5)
