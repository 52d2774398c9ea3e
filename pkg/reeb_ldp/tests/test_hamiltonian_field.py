import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from ..analysis.hamiltonian_field import (
    check_assumptions,
    evaluate,
    find_critical_points,
    positive_drift_margin,
    sqrt_drift_margin,
    system_from_config,
)
from ..errors import BadKind, ConfigError, DegenerateCritical
from .helpers import system

coords = st.floats(min_value=-2.0, max_value=2.0, allow_nan=False)


class SystemTests(SimpleTestCase):
    @settings(max_examples=50, deadline=None)
    @given(coords, coords)
    def test_harmonic_generator_is_one(self, x, y):
        # A H = 1/2 tr(sigma sigma^* Hess H) = 1 for sigma = I
        sample = evaluate(system('harmonic'), [x, y])
        self.assertAlmostEqual(sample.ah, 1.0)
        self.assertAlmostEqual(sample.g2, x * x + y * y)

    @settings(max_examples=50, deadline=None)
    @given(coords, coords)
    def test_flow_is_tangent_to_level_sets(self, x, y):
        s = system('doublewell')
        p = np.array([x, y])
        self.assertAlmostEqual(float(np.dot(s.grad(p), s.perp_grad(p))), 0.0, places=12)

    def test_config_round_trip(self):
        s = system('doublewell')
        again = system_from_config(s.to_config())
        pts = np.random.default_rng(1).uniform(-2, 2, (20, 2))
        np.testing.assert_allclose(again.h(pts), s.h(pts))
        np.testing.assert_allclose(again.sigma(pts), s.sigma(pts))

    def test_config_errors(self):
        with self.assertRaises(ConfigError):
            system_from_config({'hamiltonian': {'builtin': 'harmonic'}, 'colour': 'red'})
        with self.assertRaises(ConfigError):
            system_from_config({'hamiltonian': {'builtin': 'pendulum'}})
        with self.assertRaises(ConfigError):
            system_from_config({'hamiltonian': {'poly': [[2, 0, 1.0]]}})
        with self.assertRaises(ConfigError):
            system_from_config({'hamiltonian': {'builtin': 'harmonic'}, 'sigma': {'constant': [1.0, 2.0]}})
        with self.assertRaises(ConfigError):
            system_from_config([1, 2, 3])


class CriticalPointTests(SimpleTestCase):
    def test_doublewell_critical_points(self):
        points = find_critical_points(system('doublewell'))
        self.assertEqual([p.kind for p in points], ['minimum', 'minimum', 'saddle'])
        np.testing.assert_allclose([p.location for p in points], [[-1, 0], [1, 0], [0, 0]], atol=1e-10)
        np.testing.assert_allclose([p.h_value for p in points], [0.0, 0.0, 0.25], atol=1e-12)
        np.testing.assert_allclose(sorted(points[2].hess_eigenvalues), [-1.0, 1.0], atol=1e-10)

    def test_harmonic_has_one_minimum(self):
        points = find_critical_points(system('harmonic'))
        self.assertEqual(len(points), 1)
        self.assertEqual(points[0].kind, 'minimum')
        self.assertTrue(points[0].is_extremum)

    def test_degenerate_critical_point_is_rejected(self):
        # x^4 + y^2 has a singular Hessian at the origin
        flat = system_from_config({'hamiltonian': {'poly': [[4, 0, 1.0], [0, 2, 1.0]]},
                                   'box': [-1, 1, -1, 1]})
        with self.assertRaises(DegenerateCritical):
            find_critical_points(flat)


class AssumptionTests(SimpleTestCase):
    def test_builtin_systems_pass(self):
        for name in ('harmonic', 'doublewell'):
            report = check_assumptions(system(name))
            self.assertTrue(report.passed, report.to_json())

    def test_failed_check_is_reported_not_raised(self):
        report = check_assumptions(system('harmonic', sigma_zero=True))
        self.assertFalse(report.passed)
        self.assertFalse(report['diffusion_spectrum'].passed)
        self.assertTrue(report['growth'].passed)

    def test_steep_hessian_fails_the_bound(self):
        # d^2H/dx^2 = 30 x^4 + 2 reaches 2432 at the box corner
        steep = system_from_config({'hamiltonian': {'poly': [[6, 0, 1.0], [0, 6, 1.0], [2, 0, 1.0], [0, 2, 1.0]]},
                                    'box': [-3, 3, -3, 3]})
        report = check_assumptions(steep)
        self.assertFalse(report.passed)
        check = report['bounded_second_derivatives']
        self.assertFalse(check.passed)
        self.assertGreater(check.details['max_hessian_norm_on_box'], 2000.0)
        self.assertTrue(report['growth'].passed)

    def test_hessian_bound_is_configurable(self):
        # |Hess H| = sqrt(2) for the harmonic oscillator
        self.assertFalse(check_assumptions(system('harmonic'), hessian_bound=1.0)['bounded_second_derivatives'].passed)
        self.assertTrue(check_assumptions(system('harmonic'), hessian_bound=2.0)['bounded_second_derivatives'].passed)

    def test_harmonic_drift_margin_is_2h(self):
        s = system('harmonic')
        minimum = find_critical_points(s)[0]
        # 4 H AH - |grad H|^2 = 4H - 2H; smallest at the innermost sample radius
        margin = positive_drift_margin(s, minimum, radius=1.0, n_samples=400)
        self.assertGreater(margin, 0.0)
        radius = 1.0 / 20
        self.assertAlmostEqual(margin, 2 * 0.5 * radius ** 2, places=12)

    def test_doublewell_minima_have_positive_margin(self):
        s = system('doublewell')
        for p in find_critical_points(s):
            if p.kind == 'minimum':
                self.assertGreater(positive_drift_margin(s, p, radius=0.3), 0.0)
                self.assertGreater(sqrt_drift_margin(s, p, radius=0.3), 0.0)

    def test_drift_margin_needs_a_minimum(self):
        s = system('doublewell')
        saddle = find_critical_points(s)[2]
        with self.assertRaises(BadKind):
            positive_drift_margin(s, saddle, radius=0.3)
