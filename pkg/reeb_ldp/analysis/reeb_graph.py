"""Reeb graph of a planar Hamiltonian.

Vertices are the critical points of H in the box, edges are families of
closed level curves. Curves at a given level are found by a census of the
connected components of {H < c} and {H >= c} on a grid: in the plane the
components and the curves separating them form a tree rooted at the
component touching the box boundary, and a curve is named by the set of
critical points on its inner side. That set is constant along an edge, so
censuses at one probe level between consecutive critical values wire the
whole graph.
"""

from collections import deque
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import ndimage
from scipy.integrate import solve_ivp
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

from ..conf import get_setting
from ..errors import AmbiguousWiring, ContinuityBreak, EqualSaddleLevels, GridMismatch, NonConvergence, OutsideBox
from ..utils.logger import logger
from .hamiltonian_field import find_critical_points

INFINITY = -2
UNKNOWN = -1


def _level_tol(value):
    return 1e-12 * max(1.0, abs(value))


@dataclass(frozen=True)
class Vertex:
    id: int
    critical: object
    kind: str

    @property
    def h_value(self):
        return self.critical.h_value

    @property
    def location(self):
        return self.critical.location


@dataclass(frozen=True)
class Edge:
    id: int
    h_lo: float
    h_hi: float
    v_lo: object
    v_hi: object
    enclosed: frozenset
    increasing: bool
    anchor: tuple
    anchor_level: float

    @property
    def bounded(self):
        return np.isfinite(self.h_hi)

    def contains(self, h):
        return self.h_lo < h < self.h_hi

    @property
    def endpoints(self):
        return tuple(v for v in (self.v_lo, self.v_hi) if v is not None)

    def end_at(self, vertex_id):
        if vertex_id == self.v_lo:
            return 'lo'
        if vertex_id == self.v_hi:
            return 'hi'
        raise KeyError(vertex_id)


@dataclass(frozen=True)
class GraphPoint:
    edge_id: int
    h: float
    at_vertex: object = None


@dataclass
class _Grid:
    xs: np.ndarray
    ys: np.ndarray
    hv: np.ndarray

    @classmethod
    def sample(cls, system, n):
        xmin, xmax, ymin, ymax = system.box
        xs = np.linspace(xmin, xmax, n + 1)
        ys = np.linspace(ymin, ymax, n + 1)
        nodes = np.stack(np.meshgrid(xs, ys, indexing='ij'), axis=-1)
        return cls(xs, ys, system.h(nodes))

    def node_of(self, point):
        i = int(np.clip(np.rint((point[0] - self.xs[0]) / (self.xs[1] - self.xs[0])), 0, len(self.xs) - 1))
        j = int(np.clip(np.rint((point[1] - self.ys[0]) / (self.ys[1] - self.ys[0])), 0, len(self.ys) - 1))
        return i, j

    def point(self, i, j):
        return np.array([self.xs[i], self.ys[j]])


@dataclass(frozen=True)
class CensusCurve:
    enclosed: frozenset
    increasing: bool
    crossing: tuple


def level_census(grid, critical_points, level):
    """Closed curves of {H = level} as (enclosed critical set, orientation, a nearby point)."""
    below = grid.hv < level
    a_lab, n_a = ndimage.label(below, structure=np.ones((3, 3), dtype=int))
    b_lab, n_b = ndimage.label(~below)
    ring = np.concatenate([b_lab[0, :], b_lab[-1, :], b_lab[:, 0], b_lab[:, -1]])
    if np.any(ring == 0):
        raise AmbiguousWiring("probe level reaches the box boundary", level=level)
    roots = np.unique(ring)
    if len(roots) != 1:
        raise AmbiguousWiring("box boundary is not one superlevel component", level=level)

    a_ids, b_ids, cross = [], [], []
    for axis in (0, 1):
        first = [slice(None), slice(None)]
        second = [slice(None), slice(None)]
        first[axis] = slice(None, -1)
        second[axis] = slice(1, None)
        first, second = tuple(first), tuple(second)
        for lo_side, hi_side in ((first, second), (second, first)):
            hit = (a_lab[lo_side] > 0) & (b_lab[hi_side] > 0)
            if not np.any(hit):
                continue
            ii, jj = np.nonzero(hit)
            a_ids.append(a_lab[lo_side][hit])
            b_ids.append(b_lab[hi_side][hit])
            # grid indices of the two nodes of each crossing segment
            shift = np.zeros(2, dtype=int)
            shift[axis] = 1
            if lo_side is first:
                ia, ja, ib, jb = ii, jj, ii + shift[0], jj + shift[1]
            else:
                ia, ja, ib, jb = ii + shift[0], jj + shift[1], ii, jj
            ha, hb = grid.hv[ia, ja], grid.hv[ib, jb]
            theta = (level - ha) / (hb - ha)
            px = grid.xs[ia] + theta * (grid.xs[ib] - grid.xs[ia])
            py = grid.ys[ja] + theta * (grid.ys[jb] - grid.ys[ja])
            cross.append(np.stack([px, py], axis=-1))
    if not a_ids:
        raise AmbiguousWiring("grid resolves no curve at the level; refine the census grid", level=level)
    a_ids = np.concatenate(a_ids)
    b_ids = np.concatenate(b_ids)
    cross = np.concatenate(cross)
    keys = a_ids.astype(np.int64) * (n_b + 1) + b_ids
    uniq, first_idx = np.unique(keys, return_index=True)
    if len(uniq) != n_a + n_b - 1:
        raise AmbiguousWiring("component census is not a tree", level=level,
                              curves=len(uniq), below=n_a, above=n_b)

    # tree nodes: A components 0..n_a-1, B components n_a..n_a+n_b-1
    adjacency = [[] for _ in range(n_a + n_b)]
    pairs = []
    for idx in first_idx:
        na, nb = int(a_ids[idx]) - 1, n_a + int(b_ids[idx]) - 1
        adjacency[na].append(nb)
        adjacency[nb].append(na)
        pairs.append((na, nb, tuple(cross[idx])))
    root = n_a + int(roots[0]) - 1
    parent = np.full(n_a + n_b, -1)
    order = [root]
    seen = {root}
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                parent[nxt] = node
                order.append(nxt)
                queue.append(nxt)
    if len(order) != n_a + n_b:
        raise AmbiguousWiring("component census is disconnected", level=level)

    owned = [set() for _ in range(n_a + n_b)]
    for k, cp in enumerate(critical_points):
        i, j = grid.node_of(cp.location)
        owned[a_lab[i, j] - 1 if below[i, j] else n_a + b_lab[i, j] - 1].add(k)
    for node in reversed(order):
        if parent[node] >= 0:
            owned[parent[node]] |= owned[node]

    curves = []
    for na, nb, point in pairs:
        if parent[na] == nb:
            child, increasing = na, True
        elif parent[nb] == na:
            child, increasing = nb, False
        else:
            raise AmbiguousWiring("curve does not separate parent and child", level=level)
        if not owned[child]:
            raise AmbiguousWiring("closed curve encloses no critical point; refine the grid", level=level)
        curves.append(CensusCurve(frozenset(owned[child]), increasing, point))
    return curves


def refine_onto_level(system, point, level, iters=30):
    x = np.asarray(point, dtype=float)
    for _ in range(iters):
        g = system.grad(x)
        step = (system.h(x) - level) * g / np.dot(g, g)
        x = x - step
        if np.hypot(*step) < 1e-15 * (1 + np.hypot(*x)):
            break
    return x


def _gradient_atlas(grid, critical_points, ascending):
    """Label grid nodes with the extremum reached by discrete steepest descent (or ascent)."""
    hv = -grid.hv if ascending else grid.hv
    n0, n1 = hv.shape
    idx = np.arange(hv.size).reshape(hv.shape)
    padded = np.pad(hv, 1, constant_values=np.inf)
    pidx = np.pad(idx, 1, constant_values=-1)
    best = hv.copy()
    ptr = idx.copy()
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di == 0 and dj == 0:
                continue
            nb = padded[1 + di:1 + di + n0, 1 + dj:1 + dj + n1]
            better = nb < best
            best = np.where(better, nb, best)
            ptr = np.where(better, pidx[1 + di:1 + di + n0, 1 + dj:1 + dj + n1], ptr)
    boundary = np.zeros(hv.shape, dtype=bool)
    boundary[0, :] = boundary[-1, :] = boundary[:, 0] = boundary[:, -1] = True
    if ascending:
        ptr[boundary] = idx[boundary]
    ptr = ptr.ravel()
    while True:
        nxt = ptr[ptr]
        if np.array_equal(nxt, ptr):
            break
        ptr = nxt

    wanted = 'maximum' if ascending else 'minimum'
    cell = np.hypot(grid.xs[1] - grid.xs[0], grid.ys[1] - grid.ys[0])
    sinks = np.unique(ptr)
    sink_label = {}
    for s in sinks:
        i, j = np.unravel_index(s, hv.shape)
        if ascending and boundary[i, j]:
            sink_label[s] = INFINITY
            continue
        p = grid.point(i, j)
        label = UNKNOWN
        for k, cp in enumerate(critical_points):
            if cp.kind == wanted and np.hypot(*(p - cp.location)) <= 2 * cell:
                label = k
        sink_label[s] = label
    table = np.array([sink_label[s] for s in sinks], dtype=int)
    return table[np.searchsorted(sinks, ptr)].reshape(hv.shape)


@dataclass(eq=False)
class ReebGraph:
    vertices: tuple
    edges: tuple
    h_max: float
    box: tuple
    grid_n: int
    vertex_distance: np.ndarray
    vertex_predecessors: np.ndarray
    atlas_axes: tuple = field(repr=False)
    descent_labels: np.ndarray = field(repr=False)
    ascent_labels: np.ndarray = field(repr=False)

    @cached_property
    def vertex_values(self):
        return np.array([v.h_value for v in self.vertices])

    @cached_property
    def critical_locations(self):
        return np.array([v.location for v in self.vertices])

    @cached_property
    def edge_lo(self):
        return np.array([e.h_lo for e in self.edges])

    @cached_property
    def edge_hi(self):
        return np.array([e.h_hi for e in self.edges])

    @cached_property
    def edge_v_lo(self):
        return np.array([-1 if e.v_lo is None else e.v_lo for e in self.edges])

    @cached_property
    def edge_v_hi(self):
        return np.array([-1 if e.v_hi is None else e.v_hi for e in self.edges])

    @cached_property
    def membership(self):
        """membership[e, v]: vertex v lies on the inner side of the curves of edge e."""
        m = np.zeros((len(self.edges), len(self.vertices)), dtype=bool)
        for e in self.edges:
            m[e.id, sorted(e.enclosed)] = True
        return m

    @cached_property
    def top_value(self):
        return float(self.vertex_values.max())

    def incident(self, vertex_id):
        return [e.id for e in self.edges if vertex_id in e.endpoints]

    def edge_between(self, u, w):
        for e in self.edges:
            if set(e.endpoints) == {u, w}:
                return e.id
        raise KeyError((u, w))

    def vertex_point(self, vertex_id):
        return GraphPoint(min(self.incident(vertex_id)), self.vertices[vertex_id].h_value, vertex_id)

    def vertices_at(self, h):
        return [v.id for v in self.vertices if abs(v.h_value - h) <= _level_tol(h)]

    def shared_vertex(self, e1, h1, e2, h2):
        """Common endpoint of edges e1 and e2, or -1."""
        e1, e2 = np.broadcast_arrays(np.asarray(e1), np.asarray(e2))
        out = np.full(e1.shape, -1)
        for a in (self.edge_v_lo[e1], self.edge_v_hi[e1]):
            for b in (self.edge_v_lo[e2], self.edge_v_hi[e2]):
                out = np.where((out < 0) & (a >= 0) & (a == b), a, out)
        return out

    def distance(self, e1, h1, e2, h2):
        """Graph metric, vectorized: |dh| on one edge, else through the vertex tree."""
        e1, h1, e2, h2 = np.broadcast_arrays(np.asarray(e1), np.asarray(h1, dtype=float),
                                             np.asarray(e2), np.asarray(h2, dtype=float))
        best = np.full(e1.shape, np.inf)
        hv = self.vertex_values
        for a in (self.edge_v_lo[e1], self.edge_v_hi[e1]):
            for b in (self.edge_v_lo[e2], self.edge_v_hi[e2]):
                valid = (a >= 0) & (b >= 0)
                d = np.abs(h1 - hv[a]) + self.vertex_distance[a, b] + np.abs(hv[b] - h2)
                best = np.minimum(best, np.where(valid, d, np.inf))
        return np.where(e1 == e2, np.abs(h1 - h2), best)

    def route(self, y_from, y_to):
        """Legs (edge_id, h_start, h_end) of the tree path between two graph points."""
        if y_from.edge_id == y_to.edge_id:
            return [(y_from.edge_id, y_from.h, y_to.h)]
        e1, e2 = self.edges[y_from.edge_id], self.edges[y_to.edge_id]
        hv = self.vertex_values
        best, ends = np.inf, None
        for a in e1.endpoints:
            for b in e2.endpoints:
                d = abs(y_from.h - hv[a]) + self.vertex_distance[a, b] + abs(hv[b] - y_to.h)
                if d < best:
                    best, ends = d, (a, b)
        a, b = ends
        chain = [b]
        while chain[-1] != a:
            chain.append(int(self.vertex_predecessors[a, chain[-1]]))
        chain.reverse()
        legs = [(e1.id, y_from.h, hv[a])]
        for u, w in zip(chain[:-1], chain[1:]):
            legs.append((self.edge_between(u, w), hv[u], hv[w]))
        legs.append((e2.id, hv[b], y_to.h))
        kept = [leg for leg in legs if leg[1] != leg[2]]
        return kept or legs[:1]

    def point_toward(self, y_from, y_to, dist):
        """The point at graph distance ``dist`` from y_from along the route to y_to."""
        remaining = float(dist)
        legs = self.route(y_from, y_to)
        for k, (edge_id, h0, h1) in enumerate(legs):
            length = abs(h1 - h0)
            if remaining <= length or k == len(legs) - 1:
                remaining = min(remaining, length)
                h = h0 + np.sign(h1 - h0) * remaining
                at = self.vertices_at(h) if remaining in (0.0, length) else []
                at = [v for v in at if v in self.edges[edge_id].endpoints]
                return GraphPoint(edge_id, float(h), at[0] if at else None)
            remaining -= length
        return y_to

    def atlas_lookup(self, points):
        """Descent/ascent extremum labels from the grid atlas; ``ok`` where a 4x4 block agrees."""
        xs, ys = self.atlas_axes
        pts = np.atleast_2d(points)
        n = len(xs) - 1
        i = np.clip(np.floor((pts[:, 0] - xs[0]) / (xs[1] - xs[0])).astype(int), 1, n - 2)
        j = np.clip(np.floor((pts[:, 1] - ys[0]) / (ys[1] - ys[0])).astype(int), 1, n - 2)
        di, dj = np.meshgrid(np.arange(-1, 3), np.arange(-1, 3), indexing='ij')
        ii = i[:, None, None] + di
        jj = j[:, None, None] + dj
        desc = self.descent_labels[ii, jj].reshape(len(pts), -1)
        asc = self.ascent_labels[ii, jj].reshape(len(pts), -1)
        ok = (np.all(desc == desc[:, :1], axis=1) & np.all(asc == asc[:, :1], axis=1)
              & (desc[:, 0] >= 0) & (asc[:, 0] != UNKNOWN))
        return desc[:, 0], asc[:, 0], ok

    def separating(self, candidates, descent, ascent):
        """Mask of candidate edges whose inner side holds exactly one of the two limits."""
        mem = self.membership
        d_in = mem[:, np.maximum(descent, 0)].T
        a_in = np.where((ascent >= 0)[:, None], mem[:, np.maximum(ascent, 0)].T, False)
        return candidates & (d_in != a_in)


def _find_vertex(critical_points, value, inside, enclosed):
    found = [k for k, cp in enumerate(critical_points)
             if abs(cp.h_value - value) <= _level_tol(value)
             and (k in enclosed) == inside
             and (inside or cp.kind == 'saddle')]
    if len(found) != 1:
        raise AmbiguousWiring("cannot resolve edge endpoint", level=value, inside=inside, matches=found)
    return found[0]


def build_reeb_graph(system, critical_points=None, grid_n=None, delta_wire=None):
    """Wire the Reeb graph of ``system`` inside its box."""
    grid_n = int(grid_n or get_setting('census_grid'))
    delta_wire = float(delta_wire or get_setting('delta_wire'))
    crits = list(critical_points) if critical_points is not None else find_critical_points(system)
    if not crits:
        raise AmbiguousWiring("no critical points in the box", box=system.box)
    h_max = system.boundary_h_min()
    if max(cp.h_value for cp in crits) >= h_max:
        raise AmbiguousWiring("a critical value reaches the box truncation level; enlarge the box",
                              h_max=h_max)

    saddle_levels = sorted(cp.h_value for cp in crits if cp.kind == 'saddle')
    for a, b in zip(saddle_levels[:-1], saddle_levels[1:]):
        if b - a <= 1e-9 * max(1.0, abs(a)):
            raise EqualSaddleLevels("two saddles share a critical value", level=a)

    levels = []
    for value in sorted(cp.h_value for cp in crits):
        if not levels or value - levels[-1] > _level_tol(value):
            levels.append(value)
    probes = [0.5 * (a + b) for a, b in zip(levels[:-1], levels[1:])] + [0.5 * (levels[-1] + h_max)]

    grid = _Grid.sample(system, grid_n)
    families = {}
    census_at = []
    for p_idx, level in enumerate(probes):
        curves = level_census(grid, crits, level)
        census_at.append(sorted(tuple(sorted(c.enclosed)) for c in curves))
        for c in curves:
            fam = families.setdefault(c.enclosed, {
                'probes': [], 'increasing': c.increasing,
                'anchor': refine_onto_level(system, c.crossing, level), 'anchor_level': level,
            })
            if fam['increasing'] != c.increasing:
                raise AmbiguousWiring("curve family changes orientation", level=level)
            fam['probes'].append(p_idx)
    if len(census_at[-1]) != 1:
        raise AmbiguousWiring("more than one curve above the top critical value", curves=len(census_at[-1]))

    # curve sets just off each saddle level must match the neighbouring probes
    for cp in crits:
        if cp.kind != 'saddle':
            continue
        k = levels.index(next(v for v in levels if abs(v - cp.h_value) <= _level_tol(v)))
        gaps = [levels[k] - levels[k - 1] if k > 0 else np.inf,
                (levels[k + 1] if k + 1 < len(levels) else h_max) - levels[k]]
        delta = min(delta_wire, 0.25 * min(gaps))
        for offset, p_idx in ((-delta, k - 1), (delta, k)):
            if p_idx < 0:
                continue
            near = sorted(tuple(sorted(c.enclosed)) for c in level_census(grid, crits, cp.h_value + offset))
            if near != census_at[p_idx]:
                raise AmbiguousWiring("curve census near a saddle disagrees with the probe level",
                                      saddle=cp.location, offset=offset)

    raw_edges = []
    for enclosed, fam in families.items():
        idx = sorted(fam['probes'])
        if idx != list(range(idx[0], idx[-1] + 1)):
            raise AmbiguousWiring("curve family is not contiguous in H", enclosed=sorted(enclosed))
        h_lo = levels[idx[0]]
        h_hi = levels[idx[-1] + 1] if idx[-1] + 1 < len(levels) else np.inf
        inc = fam['increasing']
        v_lo = _find_vertex(crits, h_lo, inc, enclosed)
        v_hi = None if not np.isfinite(h_hi) else _find_vertex(crits, h_hi, not inc, enclosed)
        raw_edges.append((h_lo, h_hi, sorted(enclosed), v_lo, v_hi, inc, fam))
    raw_edges.sort(key=lambda r: (r[0], r[1], r[2]))
    edges = tuple(
        Edge(id=i, h_lo=r[0], h_hi=r[1], v_lo=r[3], v_hi=r[4], enclosed=frozenset(r[2]),
             increasing=r[5], anchor=tuple(r[6]['anchor']), anchor_level=r[6]['anchor_level'])
        for i, r in enumerate(raw_edges)
    )
    vertices = tuple(Vertex(k, cp, 'exterior' if cp.is_extremum else 'interior') for k, cp in enumerate(crits))

    for v in vertices:
        degree = sum(v.id in e.endpoints for e in edges)
        if degree != (1 if v.kind == 'exterior' else 3):
            raise AmbiguousWiring("vertex has the wrong degree", vertex=v.id, kind=v.critical.kind, degree=degree)
    if len(edges) != len(vertices):
        raise AmbiguousWiring("edge count does not match the vertex count",
                              edges=len(edges), vertices=len(vertices))

    bounded = [e for e in edges if e.bounded]
    n = len(vertices)
    weights = csr_matrix(
        ([e.h_hi - e.h_lo for e in bounded], ([e.v_lo for e in bounded], [e.v_hi for e in bounded])),
        shape=(n, n),
    )
    dist, pred = shortest_path(weights, directed=False, return_predecessors=True)

    graph = ReebGraph(
        vertices=vertices,
        edges=edges,
        h_max=h_max,
        box=system.box,
        grid_n=grid_n,
        vertex_distance=dist,
        vertex_predecessors=pred,
        atlas_axes=(grid.xs, grid.ys),
        descent_labels=_gradient_atlas(grid, crits, ascending=False),
        ascent_labels=_gradient_atlas(grid, crits, ascending=True),
    )
    logger.info(f"Reeb graph for {system.name}: {len(vertices)} vertices, {len(edges)} edges, "
                f"truncation H_max={h_max:.6g}")
    return graph


def _gradient_limit(system, graph, x, ascending, max_restarts=8):
    """Extremum reached by the steepest descent (ascent) path from x; None for escape upward."""
    sign = 1.0 if ascending else -1.0
    wanted = 'maximum' if ascending else 'minimum'
    locs = graph.critical_locations
    snap = 1e-3 * system.scale
    escape_level = graph.top_value + 0.5 * (graph.h_max - graph.top_value)
    x = np.asarray(x, dtype=float)

    for _ in range(max_restarts):
        d0 = np.min(np.hypot(*(locs - x).T))
        radius = min(snap, 0.5 * d0)

        def rhs(t, y):
            g = system.grad(y)
            return sign * g / max(np.hypot(*g), 1e-300)

        def near(t, y):
            return np.min(np.hypot(*(locs - y).T)) - radius
        near.terminal = True
        near.direction = -1

        def escape(t, y):
            return system.h(y) - escape_level
        escape.terminal = True
        escape.direction = 1

        events = [near, escape] if ascending else [near]
        sol = solve_ivp(rhs, (0.0, 20 * system.scale), x, events=events,
                        rtol=1e-8, atol=1e-10, max_step=0.02 * system.scale)
        if ascending and len(sol.t_events[1]):
            return None
        if not len(sol.t_events[0]):
            raise NonConvergence("gradient path did not reach a critical point", start=tuple(x))
        end = sol.y_events[0][0]
        k = int(np.argmin(np.hypot(*(locs - end).T)))
        cp = graph.vertices[k].critical
        if cp.kind == wanted:
            return k
        if cp.kind != 'saddle':
            raise NonConvergence("gradient path reached the wrong extremum", kind=cp.kind)
        # sitting on a stable manifold of the saddle: leave along the unstable direction
        eigvals, eigvecs = np.linalg.eigh(system.hess(np.array(cp.location)))
        e = eigvecs[:, 1] if ascending else eigvecs[:, 0]
        side = np.sign(np.dot(end - cp.location, e)) or 1.0
        x = np.asarray(cp.location) + 2 * radius * side * e
    raise NonConvergence("gradient path kept returning to saddles", start=tuple(x))


def project(system, graph, x):
    """Map a plane point to its position (edge, H) on the Reeb graph."""
    x = np.asarray(x, dtype=float)
    if not system.contains(x):
        raise OutsideBox("point lies outside the box", point=tuple(x), box=system.box)
    h = float(system.h(x))
    for v in graph.vertices:
        if np.hypot(*(x - v.location)) <= 1e-12 * system.scale:
            return graph.vertex_point(v.id)
    at_level = graph.vertices_at(h)
    cand = (graph.edge_lo < h) & (h < graph.edge_hi)
    if cand.sum() == 1 and not at_level:
        return GraphPoint(int(np.argmax(cand)), h)

    if cand.any():
        desc, asc, ok = graph.atlas_lookup(x[None, :])
        if ok[0] and not at_level:
            sep = graph.separating(cand[None, :], desc, asc)[0]
            if sep.sum() == 1:
                return GraphPoint(int(np.argmax(sep)), h)
        descent = _gradient_limit(system, graph, x, ascending=False)
        ascent = _gradient_limit(system, graph, x, ascending=True)
        sep = graph.separating(cand[None, :], np.array([descent]),
                               np.array([INFINITY if ascent is None else ascent]))[0]
        if sep.sum() == 1:
            return GraphPoint(int(np.argmax(sep)), h)
        if sep.sum() > 1:
            raise AmbiguousWiring("several edges separate the gradient limits", point=tuple(x))
    if at_level:
        nearest = min(at_level, key=lambda k: np.hypot(*(x - graph.vertices[k].location)))
        return graph.vertex_point(nearest)
    raise AmbiguousWiring("no edge contains the point", point=tuple(x), h=h)


@dataclass(frozen=True, eq=False)
class GraphPath:
    """A graph-valued path sampled on a time grid; ``at_vertex`` is -1 off vertices."""

    graph: ReebGraph
    times: np.ndarray
    edge_ids: np.ndarray
    h: np.ndarray
    at_vertex: np.ndarray

    def __post_init__(self):
        n = len(self.times)
        if not (len(self.edge_ids) == len(self.h) == len(self.at_vertex) == n):
            raise ValueError("graph path arrays differ in length")
        if n > 1 and np.any(np.diff(self.times) <= 0):
            raise ValueError("graph path times must be strictly increasing")

    @classmethod
    def from_points(cls, graph, times, points):
        return cls(
            graph=graph,
            times=np.asarray(times, dtype=float),
            edge_ids=np.array([p.edge_id for p in points], dtype=int),
            h=np.array([p.h for p in points], dtype=float),
            at_vertex=np.array([-1 if p.at_vertex is None else p.at_vertex for p in points], dtype=int),
        )

    def __len__(self):
        return len(self.times)

    @property
    def horizon(self):
        return float(self.times[-1] - self.times[0])

    def point(self, k):
        v = int(self.at_vertex[k])
        return GraphPoint(int(self.edge_ids[k]), float(self.h[k]), None if v < 0 else v)

    def points(self):
        return [self.point(k) for k in range(len(self))]

    def continuity_breaks(self):
        """Indices k where samples k and k+1 are neither on one edge nor joined at a vertex."""
        e1, e2 = self.edge_ids[:-1], self.edge_ids[1:]
        joined = self.graph.shared_vertex(e1, self.h[:-1], e2, self.h[1:])
        return np.flatnonzero((e1 != e2) & (joined < 0))

    def resample(self, times):
        """Graph-linear interpolation onto a new grid covering the same horizon."""
        times = np.asarray(times, dtype=float)
        if times[0] < self.times[0] - 1e-12 or times[-1] > self.times[-1] + 1e-12:
            raise GridMismatch("resampling grid exceeds the path horizon")
        m = np.clip(np.searchsorted(self.times, times, side='right') - 1, 0, len(self.times) - 2)
        theta = np.clip((times - self.times[m]) / (self.times[m + 1] - self.times[m]), 0.0, 1.0)
        e0, e1 = self.edge_ids[m], self.edge_ids[m + 1]
        h0, h1 = self.h[m], self.h[m + 1]
        edges = e0.copy()
        hs = h0 + theta * (h1 - h0)
        at = np.where(theta == 0, self.at_vertex[m], np.where(theta == 1, self.at_vertex[m + 1], -1))
        for k in np.flatnonzero(e0 != e1):
            v = int(self.graph.shared_vertex(e0[k], h0[k], e1[k], h1[k]))
            if v < 0:
                raise ContinuityBreak("path jumps between edges without a shared vertex", index=int(m[k]))
            hv = self.graph.vertex_values[v]
            d1, d2 = abs(hv - h0[k]), abs(h1[k] - hv)
            s = theta[k] * (d1 + d2)
            if s < d1:
                edges[k], hs[k], at[k] = e0[k], h0[k] + np.sign(hv - h0[k]) * s, -1
            elif s > d1:
                edges[k], hs[k], at[k] = e1[k], hv + np.sign(h1[k] - hv) * (s - d1), -1
            else:
                edges[k], hs[k], at[k] = e0[k], hv, v
        return GraphPath(self.graph, times, edges, hs, at)


def _assign(system, graph, xs, hs, resync_every):
    """Edge ids and vertex flags for one ordered sequence of plane points."""
    n = len(xs)
    cand = (hs[:, None] > graph.edge_lo) & (hs[:, None] < graph.edge_hi)
    count = cand.sum(axis=1)
    at_level = np.any(np.abs(hs[:, None] - graph.vertex_values) <= 1e-12 * np.maximum(1.0, np.abs(hs))[:, None],
                      axis=1)
    edges = np.where(count == 1, np.argmax(cand, axis=1), -1)
    at_vertex = np.full(n, -1)
    settled = (count == 1) & ~at_level

    pending = ~settled
    if np.any(pending):
        idx = np.flatnonzero(pending & ~at_level & (count > 1))
        if len(idx):
            desc, asc, ok = graph.atlas_lookup(xs[idx])
            sep = graph.separating(cand[idx], desc, asc)
            unique = ok & (sep.sum(axis=1) == 1)
            edges[idx[unique]] = np.argmax(sep[unique], axis=1)
            settled[idx[unique]] = True

    for k in np.flatnonzero(~settled):
        prev = edges[k - 1] if k > 0 else -1
        if at_level[k] or prev < 0 or k % resync_every == 0:
            p = project(system, graph, xs[k])
            edges[k], at_vertex[k] = p.edge_id, -1 if p.at_vertex is None else p.at_vertex
            continue
        e = graph.edges[prev]
        if e.contains(hs[k]):
            edges[k] = prev
            continue
        crossed = e.v_hi if hs[k] >= e.h_hi else e.v_lo
        nxt = [i for i in graph.incident(crossed) if graph.edges[i].contains(hs[k])]
        if len(nxt) == 1:
            edges[k] = nxt[0]
        else:
            p = project(system, graph, xs[k])
            edges[k], at_vertex[k] = p.edge_id, -1 if p.at_vertex is None else p.at_vertex
    return edges, at_vertex


def project_trajectory(system, graph, states, times=None, resync_every=None):
    """Project an ordered sequence of plane points; consecutive samples must stay graph-continuous."""
    xs = np.asarray(states, dtype=float).reshape(-1, 2)
    outside = ~system.contains(xs)
    if np.any(outside):
        raise OutsideBox("trajectory leaves the box", index=int(np.argmax(outside)))
    resync_every = int(resync_every or get_setting('resync_every'))
    hs = system.h(xs)
    edges, at_vertex = _assign(system, graph, xs, hs, resync_every)
    times = np.arange(len(xs), dtype=float) if times is None else np.asarray(times, dtype=float)
    path = GraphPath(graph, times, edges, hs, at_vertex)
    breaks = path.continuity_breaks()
    if len(breaks):
        raise ContinuityBreak("consecutive samples are not graph-continuous", index=int(breaks[0]),
                              edges=(int(edges[breaks[0]]), int(edges[breaks[0] + 1])))
    return path


def project_batch(system, graph, states, resync_every=None):
    """Edge ids, H and vertex flags for a batch of trajectories of shape (n_paths, n_times, 2)."""
    states = np.asarray(states, dtype=float)
    resync_every = int(resync_every or get_setting('resync_every'))
    hs = system.h(states)
    flat_h = hs.reshape(-1)
    cand = (flat_h[:, None] > graph.edge_lo) & (flat_h[:, None] < graph.edge_hi)
    if np.all(cand.sum(axis=1) == 1):
        edges = np.argmax(cand, axis=1).reshape(hs.shape)
        return edges, hs, np.full(hs.shape, -1)
    edges = np.empty(hs.shape, dtype=int)
    at_vertex = np.empty(hs.shape, dtype=int)
    for row in range(states.shape[0]):
        edges[row], at_vertex[row] = _assign(system, graph, states[row], hs[row], resync_every)
    return edges, hs, at_vertex


def graph_distance(graph, y1, y2):
    return float(graph.distance(y1.edge_id, y1.h, y2.edge_id, y2.h))


def path_distance(p1, p2):
    """Uniform graph distance between two paths on the same grid (or the same horizon)."""
    if len(p1) == len(p2) and np.allclose(p1.times, p2.times, rtol=0, atol=1e-12):
        other = p2
    elif abs(p1.times[0] - p2.times[0]) <= 1e-12 and abs(p1.times[-1] - p2.times[-1]) <= 1e-9:
        other = p2.resample(p1.times)
    else:
        raise GridMismatch("paths have different horizons", horizons=(p1.horizon, p2.horizon))
    return float(np.max(p1.graph.distance(p1.edge_ids, p1.h, other.edge_ids, other.h)))


def export_json(graph):
    return {
        'h_max': graph.h_max,
        'box': list(graph.box),
        'vertices': [
            {'id': v.id, 'x': v.location[0], 'y': v.location[1], 'h': v.h_value,
             'kind': v.kind, 'critical_kind': v.critical.kind,
             'hess_eigenvalues': list(v.critical.hess_eigenvalues)}
            for v in graph.vertices
        ],
        'edges': [
            {'id': e.id, 'h_lo': e.h_lo, 'h_hi': e.h_hi if e.bounded else None,
             'v_lo': e.v_lo, 'v_hi': e.v_hi, 'enclosed': sorted(e.enclosed),
             'increasing': e.increasing}
            for e in graph.edges
        ],
    }
