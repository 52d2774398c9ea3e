import math

import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from ..analysis.action_functional import (
    evaluate_action,
    first_integral,
    minimize_action,
    tube_infimum_action,
    zero_speed_at_exterior_vertex_check,
)
from ..analysis.reeb_graph import GraphPath, GraphPoint
from ..errors import UncoveredEdge
from .helpers import graph, ramp, tables

QUARTER_LN2 = 0.25 * math.log(2.0)
MIN_ONE_TWO = (math.sqrt(2.0) - 1.0) ** 2


class HarmonicActionTests(SimpleTestCase):
    def setUp(self):
        self.g, self.tables = graph('harmonic'), tables('harmonic')

    def test_linear_ramp(self):
        action = evaluate_action(self.tables, ramp(self.g, 0, 1.0, 2.0))
        self.assertAlmostEqual(action.value, QUARTER_LN2, delta=1e-4)
        self.assertTrue(action.finite)
        self.assertEqual(action.flags, ())

    def test_constant_path_costs_nothing(self):
        action = evaluate_action(self.tables, ramp(self.g, 0, 1.5, 1.5))
        self.assertEqual(action.value, 0.0)

    def test_leaving_the_extremum_costs_infinity(self):
        action = evaluate_action(self.tables, ramp(self.g, 0, 0.0, 1.0))
        self.assertTrue(math.isinf(action.value))
        self.assertIsNone(action.to_json()['value'])

    def test_minimizer(self):
        result = minimize_action(self.tables, self.g, GraphPoint(0, 1.0), GraphPoint(0, 2.0), 1.0)
        self.assertAlmostEqual(result.action.value, MIN_ONE_TWO, delta=1e-3)
        self.assertEqual(result.diagnostics['stage'], 'single_edge')
        self.assertLessEqual(result.diagnostics['dp_rel_diff'], 1e-3)
        self.assertLess(result.diagnostics['shooting_residual'], 1e-4)
        self.assertLess(result.diagnostics['first_integral_cv'], 1e-2)
        # E = S / T for a free-time-invariant Lagrangian
        self.assertAlmostEqual(result.lagrange_energy, result.action.value, delta=1e-9)

    def test_minimizer_has_constant_first_integral(self):
        result = minimize_action(self.tables, self.g, GraphPoint(0, 1.0), GraphPoint(0, 3.0), 2.0)
        values = first_integral(self.tables, result.path)
        np.testing.assert_allclose(values, result.lagrange_energy, rtol=1e-2)

    def test_evaluated_minimizer_matches_its_action(self):
        result = minimize_action(self.tables, self.g, GraphPoint(0, 1.0), GraphPoint(0, 2.0), 1.0)
        self.assertAlmostEqual(evaluate_action(self.tables, result.sample(2000)).value,
                               result.action.value, delta=1e-3)

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.floats(0.5, 3.0), min_size=3, max_size=12))
    def test_no_path_beats_the_minimizer(self, inner):
        hs = [1.0, *inner, 2.0]
        times = np.linspace(0.0, 1.0, len(hs))
        path = GraphPath.from_points(self.g, times, [GraphPoint(0, h) for h in hs])
        self.assertGreaterEqual(evaluate_action(self.tables, path).value, MIN_ONE_TWO - 1e-3)

    def test_departure_from_the_minimum(self):
        result = minimize_action(self.tables, self.g, GraphPoint(0, 0.0, 0), GraphPoint(0, 1.0), 1.0)
        report = zero_speed_at_exterior_vertex_check(result, self.tables)
        self.assertTrue(report.passed)
        self.assertGreater(report.exponent, 0.5)

    def test_linear_departure_is_flagged(self):
        report = zero_speed_at_exterior_vertex_check(ramp(self.g, 0, 0.0, 1.0), self.tables)
        self.assertEqual(report.status, 'violated')
        self.assertTrue(math.isinf(report.action))

    def test_check_skips_paths_away_from_vertices(self):
        report = zero_speed_at_exterior_vertex_check(ramp(self.g, 0, 1.0, 2.0))
        self.assertEqual(report.status, 'skipped')

    def test_tube_infimum_relaxes_the_endpoint(self):
        phi = ramp(self.g, 0, 1.0, 3.0)
        result = tube_infimum_action(self.tables, self.g, phi, 0.3)
        expected = (math.sqrt(5.4) - math.sqrt(2.0)) ** 2 / 2
        self.assertAlmostEqual(result.action.value, expected, delta=1e-3)
        self.assertAlmostEqual(result.path.h[-1], 2.7)
        wide = tube_infimum_action(self.tables, self.g, phi, 2.5)
        self.assertEqual(wide.action.value, 0.0)

    def test_bad_horizon(self):
        with self.assertRaises(ValueError):
            minimize_action(self.tables, self.g, GraphPoint(0, 1.0), GraphPoint(0, 2.0), 0.0)

    def test_missing_table(self):
        with self.assertRaises(UncoveredEdge):
            evaluate_action({}, ramp(self.g, 0, 1.0, 2.0))


class DoubleWellActionTests(SimpleTestCase):
    def setUp(self):
        self.g, self.tables = graph('doublewell'), tables('doublewell')

    def test_route_through_the_saddle(self):
        result = minimize_action(self.tables, self.g, GraphPoint(0, 0.1), GraphPoint(1, 0.1), 1.0)
        self.assertEqual(result.diagnostics['stage'], 'cross_vertex')
        legs = result.diagnostics['legs']
        self.assertEqual([leg['edge'] for leg in legs], [0, 1])
        self.assertAlmostEqual(legs[0]['f_length'], legs[1]['f_length'], delta=1e-4 * legs[0]['f_length'])
        self.assertTrue(result.action.finite)
        self.assertGreater(result.action.value, 0.0)
        self.assertEqual(result.path.continuity_breaks().size, 0)
        self.assertLessEqual(result.diagnostics['dp_rel_diff'], 1e-2)

    def test_jump_between_wells_is_costed_through_the_saddle(self):
        times = [0.0, 1.0]
        path = GraphPath.from_points(self.g, times, [GraphPoint(0, 0.1), GraphPoint(1, 0.1)])
        action = evaluate_action(self.tables, path)
        detour = GraphPath.from_points(self.g, [0.0, 0.5, 1.0],
                                       [GraphPoint(0, 0.1), GraphPoint(0, 0.25, 2), GraphPoint(1, 0.1)])
        self.assertAlmostEqual(action.value, evaluate_action(self.tables, detour).value,
                               delta=1e-6 * action.value)

    def test_repeated_crossings_are_flagged(self):
        points = [GraphPoint(0, 0.2) if k % 2 == 0 else GraphPoint(2, 0.3) for k in range(7)]
        path = GraphPath.from_points(self.g, np.linspace(0.0, 1.0, 7), points)
        action = evaluate_action(self.tables, path)
        self.assertEqual(action.flags, ('vertex_oscillation:2',))
