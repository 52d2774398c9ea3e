import numpy as np
from django.test import SimpleTestCase
from hypothesis import given, settings
from hypothesis import strategies as st

from ..analysis.reeb_graph import (
    GraphPath,
    GraphPoint,
    export_json,
    graph_distance,
    path_distance,
    project,
    project_batch,
    project_trajectory,
)
from ..errors import GridMismatch, OutsideBox
from .helpers import graph, system


class DoubleWellGraphTests(SimpleTestCase):
    def setUp(self):
        self.g = graph('doublewell')

    def test_topology(self):
        kinds = sorted(v.kind for v in self.g.vertices)
        self.assertEqual(kinds, ['exterior', 'exterior', 'interior'])
        self.assertEqual(len(self.g.edges), 3)
        ranges = [(e.h_lo, e.h_hi) for e in self.g.edges]
        np.testing.assert_allclose(ranges[0], (0.0, 0.25), atol=1e-12)
        np.testing.assert_allclose(ranges[1], (0.0, 0.25), atol=1e-12)
        self.assertAlmostEqual(ranges[2][0], 0.25)
        self.assertFalse(self.g.edges[2].bounded)
        self.assertEqual(self.g.incident(2), [0, 1, 2])

    def test_wiring_is_stable_across_grid_resolutions(self):
        fine = graph('doublewell', grid_n=512)
        self.assertEqual(export_json(fine)['edges'], export_json(self.g)['edges'])

    def test_export_format(self):
        doc = export_json(self.g)
        self.assertEqual(len(doc['vertices']), 3)
        self.assertEqual({'id', 'x', 'y', 'h', 'kind'} - set(doc['vertices'][0]), set())
        self.assertIsNone(doc['edges'][2]['h_hi'])
        self.assertIsNone(doc['edges'][2]['v_hi'])

    def test_projection_distinguishes_the_wells(self):
        s = system('doublewell')
        left, right = project(s, self.g, [-1.2, 0.1]), project(s, self.g, [0.9, -0.2])
        self.assertEqual(left.edge_id, 0)
        self.assertEqual(right.edge_id, 1)
        outer = project(s, self.g, [0.0, 1.5])
        self.assertEqual(outer.edge_id, 2)
        self.assertAlmostEqual(outer.h, float(s.h(np.array([0.0, 1.5]))))

    def test_projection_of_critical_points_hits_vertices(self):
        s = system('doublewell')
        for v in self.g.vertices:
            p = project(s, self.g, v.location)
            self.assertEqual(p.at_vertex, v.id)
            self.assertAlmostEqual(p.h, v.h_value)

    def test_projection_outside_box(self):
        with self.assertRaises(OutsideBox):
            project(system('doublewell'), self.g, [5.0, 0.0])

    def test_graph_distance_goes_through_the_saddle(self):
        a, b = GraphPoint(0, 0.1), GraphPoint(1, 0.2)
        self.assertAlmostEqual(graph_distance(self.g, a, b), 0.15 + 0.05)
        c = GraphPoint(2, 0.5)
        self.assertAlmostEqual(graph_distance(self.g, a, c), 0.15 + 0.25)
        self.assertAlmostEqual(graph_distance(self.g, a, GraphPoint(0, 0.2)), 0.1)

    @settings(max_examples=40, deadline=None)
    @given(st.sampled_from([0, 1, 2]), st.floats(0.0, 0.25), st.sampled_from([0, 1, 2]), st.floats(0.0, 0.25),
           st.sampled_from([0, 1, 2]), st.floats(0.0, 0.25))
    def test_graph_distance_is_a_metric(self, e1, h1, e2, h2, e3, h3):
        pts = [GraphPoint(e, h + (0.25 if e == 2 else 0.0)) for e, h in ((e1, h1), (e2, h2), (e3, h3))]
        d = lambda p, q: graph_distance(self.g, p, q)  # noqa: E731
        self.assertAlmostEqual(d(pts[0], pts[1]), d(pts[1], pts[0]))
        self.assertLessEqual(d(pts[0], pts[2]), d(pts[0], pts[1]) + d(pts[1], pts[2]) + 1e-12)

    def test_route_between_wells(self):
        legs = self.g.route(GraphPoint(0, 0.1), GraphPoint(1, 0.2))
        self.assertEqual([leg[0] for leg in legs], [0, 1])
        self.assertAlmostEqual(legs[0][2], 0.25)

    def test_trajectory_projection_crosses_the_saddle(self):
        s = system('doublewell')
        xs = np.linspace(-1.2, 1.2, 241)
        states = np.stack([xs, np.full_like(xs, 0.3)], axis=-1)
        path = project_trajectory(s, self.g, states)
        self.assertEqual(path.edge_ids[0], 0)
        self.assertEqual(path.edge_ids[-1], 1)
        self.assertIn(2, set(path.edge_ids.tolist()))
        self.assertEqual(len(path.continuity_breaks()), 0)
        edges, hs, _ = project_batch(s, self.g, states[None])
        np.testing.assert_array_equal(edges[0], path.edge_ids)

    def test_jump_between_wells_passes_through_the_saddle(self):
        times = np.array([0.0, 1.0])
        jump = GraphPath.from_points(self.g, times, [GraphPoint(0, 0.1), GraphPoint(1, 0.1)])
        self.assertEqual(len(jump.continuity_breaks()), 0)
        mid = jump.resample(np.array([0.0, 0.25, 0.5, 0.75, 1.0]))
        self.assertEqual(list(mid.edge_ids), [0, 0, 0, 1, 1])
        np.testing.assert_allclose(mid.h, [0.1, 0.175, 0.25, 0.175, 0.1])
        self.assertEqual(mid.at_vertex[2], 2)


class GraphPathTests(SimpleTestCase):
    def setUp(self):
        self.g = graph('doublewell')

    def test_resample_through_a_vertex(self):
        times = np.array([0.0, 1.0])
        path = GraphPath.from_points(self.g, times, [GraphPoint(0, 0.15), GraphPoint(2, 0.35)])
        fine = path.resample(np.linspace(0.0, 1.0, 5))
        np.testing.assert_array_equal(fine.edge_ids, [0, 0, 0, 2, 2])
        np.testing.assert_allclose(fine.h, [0.15, 0.2, 0.25, 0.3, 0.35])
        self.assertEqual(fine.at_vertex[2], 2)

    def test_path_distance(self):
        times = np.linspace(0.0, 1.0, 11)
        a = GraphPath.from_points(self.g, times, [GraphPoint(0, 0.1)] * 11)
        b = GraphPath.from_points(self.g, times, [GraphPoint(0, 0.1 + 0.01 * k) for k in range(11)])
        self.assertAlmostEqual(path_distance(a, b), 0.1)
        coarse = GraphPath.from_points(self.g, [0.0, 1.0], [GraphPoint(0, 0.1), GraphPoint(0, 0.2)])
        self.assertAlmostEqual(path_distance(b, coarse), 0.0, places=12)

    def test_path_distance_needs_matching_horizons(self):
        a = GraphPath.from_points(self.g, [0.0, 1.0], [GraphPoint(0, 0.1)] * 2)
        b = GraphPath.from_points(self.g, [0.0, 2.0], [GraphPoint(0, 0.1)] * 2)
        with self.assertRaises(GridMismatch):
            path_distance(a, b)

    def test_times_must_increase(self):
        with self.assertRaises(ValueError):
            GraphPath.from_points(self.g, [0.0, 0.0], [GraphPoint(0, 0.1)] * 2)


class HarmonicGraphTests(SimpleTestCase):
    def test_single_open_edge(self):
        g = graph('harmonic')
        self.assertEqual(len(g.vertices), 1)
        self.assertEqual(len(g.edges), 1)
        edge = g.edges[0]
        self.assertEqual(edge.h_lo, g.vertices[0].h_value)
        self.assertFalse(edge.bounded)
        self.assertAlmostEqual(g.h_max, 4.5, places=5)
