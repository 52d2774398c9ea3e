"""Action functional S(phi) = 1/2 int |phi'|^2 / B^2 dt on graph paths and its minimizers.

Every cell of a path is costed exactly for the straight segment between its
endpoints: 1/2 (|dphi| / dt) |int dphi / B^2|. Dwelling (dphi = 0) costs
nothing, which is the 0/0 = 0 convention at vertex levels. A moving cell that
touches an extremum vertex costs +inf because 1/B^2 is not integrable there.

Minimizers use the reparametrization F(h) = int dh / sqrt(B^2): in F the
Lagrangian is 1/2 F'^2, so the optimal path runs along the tree route at
constant F-speed and S = D_F^2 / (2T).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import PchipInterpolator

from ..conf import get_setting
from ..errors import ContinuityBreak, UncoveredEdge, Unreachable
from ..utils.logger import logger
from .reeb_graph import GraphPath, graph_distance

GAUSS_NODES, GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(8)


@dataclass(frozen=True, eq=False)
class ActionValue:
    value: float
    breakdown: np.ndarray
    vertex_dwell: float
    flags: tuple = ()

    @property
    def finite(self):
        return math.isfinite(self.value)

    def to_json(self):
        return {
            'value': self.value if self.finite else None,
            'infinite': not self.finite,
            'vertex_dwell': self.vertex_dwell,
            'flags': list(self.flags),
        }


def _table(tables, edge_id):
    try:
        return tables[int(edge_id)]
    except KeyError:
        raise UncoveredEdge("no coefficient table for edge", edge=int(edge_id)) from None


def _touches(table, a, b):
    """Which vertex ends of the table span the closed segment [a, b] touches."""
    lo_v, hi_v = table.vertex_end(min(a, b)), table.vertex_end(max(a, b))
    return {e for e in (lo_v, hi_v) if e is not None}


def inverse_b2_integral(table, a, b, b2_floor=None):
    """|int_a^b dh / B^2(h)|, +inf where the integrand is not integrable."""
    if a == b:
        return 0.0
    b2_floor = float(b2_floor or get_setting('b2_floor'))
    lo, hi = min(a, b), max(a, b)
    ends = _touches(table, lo, hi)
    kinds = {'lo': table.lo_end, 'hi': table.hi_end}
    if any(kinds[e] == 'extremum' for e in ends):
        return math.inf
    half, mid = 0.5 * (hi - lo), 0.5 * (hi + lo)
    vals = table.b2(mid + half * GAUSS_NODES)
    if np.any(vals <= b2_floor):
        return math.inf
    if ends:
        value, _ = quad(lambda h: 1.0 / float(table.b2(h)), lo, hi, limit=200)
        return float(value)
    return float(half * np.sum(GAUSS_WEIGHTS / vals))


def evaluate_action(tables, path, b2_floor=None):
    """Exact-in-cell action of a graph path."""
    graph = path.graph
    for e in np.unique(path.edge_ids):
        _table(tables, e)
    n_cells = len(path) - 1
    breakdown = np.zeros(n_cells)
    dwell = 0.0
    crossings = {}
    for m in range(n_cells):
        dt = path.times[m + 1] - path.times[m]
        e0, e1 = int(path.edge_ids[m]), int(path.edge_ids[m + 1])
        h0, h1 = float(path.h[m]), float(path.h[m + 1])
        if h0 == h1:
            if path.at_vertex[m] >= 0 or graph.vertices_at(h0):
                dwell += dt
            continue
        if e0 == e1:
            integral = inverse_b2_integral(_table(tables, e0), h0, h1, b2_floor)
            breakdown[m] = 0.5 * abs(h1 - h0) / dt * integral
            continue
        v = int(graph.shared_vertex(e0, h0, e1, h1))
        if v < 0:
            raise ContinuityBreak("path jumps between edges without a shared vertex", index=m)
        hv = graph.vertex_values[v]
        crossings[v] = crossings.get(v, 0) + 1
        integral = (inverse_b2_integral(_table(tables, e0), h0, hv, b2_floor)
                    + inverse_b2_integral(_table(tables, e1), hv, h1, b2_floor))
        breakdown[m] = 0.5 * (abs(h0 - hv) + abs(hv - h1)) / dt * integral

    flags = tuple(f"vertex_oscillation:{v}" for v, n in sorted(crossings.items()) if n >= 3)
    if flags:
        logger.warning(f"Path crosses vertices repeatedly ({', '.join(flags)}); "
                       f"the discrete action depends on grid alignment there")
    value = math.inf if np.any(np.isinf(breakdown)) else math.fsum(breakdown)
    return ActionValue(value, breakdown, dwell, flags)


def sqrt_b2_length(table, a, b, b2_floor=None):
    """|int_a^b dh / sqrt(B^2(h))|: the F-length of a segment."""
    if a == b:
        return 0.0
    b2_floor = float(b2_floor or get_setting('b2_floor'))
    lo, hi = min(a, b), max(a, b)
    inner = lo + (hi - lo) * np.linspace(0.01, 0.99, 33)
    if np.any(table.b2(inner) <= b2_floor):
        return math.inf
    value, _ = quad(lambda h: 1.0 / math.sqrt(max(float(table.b2(h)), 1e-300)), lo, hi, limit=200)
    return float(value)


@dataclass(frozen=True, eq=False)
class RouteLeg:
    edge_id: int
    h_start: float
    h_end: float
    f_length: float
    f_grid: np.ndarray = field(repr=False)
    h_grid: np.ndarray = field(repr=False)

    def h_at(self, f):
        """Energy at F-distance f from the leg start."""
        f = np.clip(f, 0.0, self.f_length)
        return PchipInterpolator(self.f_grid, self.h_grid)(f)


def _leg_nodes(table, a, b, n):
    nodes = [np.linspace(a, b, n + 1)]
    span = b - a
    k = np.arange(1, 21)
    if table.vertex_end(a) is not None:
        nodes.append(a + span * 2.0 ** -k)
    if table.vertex_end(b) is not None:
        nodes.append(b - span * 2.0 ** -k)
    nodes = np.concatenate(nodes)
    order = np.argsort((nodes - a) / span)
    nodes = nodes[order]
    frac = (nodes - a) / span
    keep = np.concatenate([[True], np.diff(frac) > 0])
    return nodes[keep]


@dataclass(frozen=True, eq=False)
class RouteProfile:
    """Tree route between two graph points, parametrized by F-distance."""

    graph: object
    legs: tuple

    @classmethod
    def build(cls, tables, graph, y0, y1, n_h=400, b2_floor=None):
        legs = []
        for edge_id, a, b in graph.route(y0, y1):
            table = _table(tables, edge_id)
            for h in (a, b):
                if not table.covers(h):
                    raise Unreachable("route leaves the tabulated span", edge=edge_id, h=h)
            nodes = _leg_nodes(table, a, b, max(16, n_h))
            pieces = [sqrt_b2_length(table, p, q, b2_floor) for p, q in zip(nodes[:-1], nodes[1:])]
            if not all(math.isfinite(p) for p in pieces):
                edge = graph.edges[edge_id]
                blocking = edge.v_lo if abs(a - edge.h_lo) < abs(a - edge.h_hi) else edge.v_hi
                raise Unreachable("diffusion vanishes along the route", edge=edge_id, vertex=blocking)
            f_grid = np.concatenate([[0.0], np.cumsum(pieces)])
            legs.append(RouteLeg(edge_id, a, b, float(f_grid[-1]), f_grid, nodes))
        return cls(graph, tuple(legs))

    @property
    def length(self):
        return math.fsum(leg.f_length for leg in self.legs)

    def locate(self, f):
        """Graph points at F-distances ``f`` from the route start."""
        f = np.atleast_1d(np.asarray(f, dtype=float))
        offsets = np.concatenate([[0.0], np.cumsum([leg.f_length for leg in self.legs])])
        idx = np.clip(np.searchsorted(offsets, f, side='right') - 1, 0, len(self.legs) - 1)
        edges = np.empty(len(f), dtype=int)
        hs = np.empty(len(f))
        for k, leg in enumerate(self.legs):
            sel = idx == k
            edges[sel] = leg.edge_id
            hs[sel] = leg.h_at(f[sel] - offsets[k])
        # exact endpoints
        hs[f <= 0] = self.legs[0].h_start
        hs[f >= offsets[-1]] = self.legs[-1].h_end
        at_vertex = np.full(len(f), -1)
        for k, leg in enumerate(self.legs):
            for value in (leg.h_start, leg.h_end):
                hit = (edges == leg.edge_id) & (hs == value)
                vs = [v for v in self.graph.vertices_at(value) if v in self.graph.edges[leg.edge_id].endpoints]
                if vs:
                    at_vertex[hit] = vs[0]
        return edges, hs, at_vertex

    def path(self, horizon, n_time):
        times = np.linspace(0.0, horizon, n_time + 1)
        edges, hs, at_vertex = self.locate(self.length * times / horizon)
        return GraphPath(self.graph, times, edges, hs, at_vertex)


@dataclass(frozen=True, eq=False)
class MinActionResult:
    path: GraphPath
    action: ActionValue
    lagrange_energy: float
    diagnostics: dict
    route: object = field(default=None, repr=False)

    def sample(self, n_time):
        """The minimizer on a refined time grid."""
        if self.route is None:
            return self.path.resample(np.linspace(self.path.times[0], self.path.times[-1], n_time + 1))
        return self.route.path(self.path.horizon, n_time)

    def to_json(self):
        return {
            'action': self.action.value,
            'E': self.lagrange_energy,
            'diagnostics': {k: v for k, v in self.diagnostics.items() if k != 'dp_path'},
        }


def _constant_result(graph, y, horizon, n_time):
    times = np.linspace(0.0, horizon, n_time + 1)
    path = GraphPath.from_points(graph, times, [y] * (n_time + 1))
    action = ActionValue(0.0, np.zeros(n_time), horizon if y.at_vertex is not None else 0.0)
    return MinActionResult(path, action, 0.0, {'stage': 'constant'})


def route_dp(profile, horizon, n_time, n_h):
    """Dynamic programming over (time step, F-uniform route node) with leg cost dF^2 / (2 dt).

    Among equal-cost predecessors the one with the lowest node index wins.
    Returns the optimal cost and the node index per time.
    """
    delta = profile.length / n_h
    dt = horizon / n_time
    reach = int(math.ceil(2 * n_h / n_time)) + 2
    value = np.full(n_h + 1, np.inf)
    value[0] = 0.0
    choice = np.zeros((n_time, n_h + 1), dtype=np.int32)
    for step in range(n_time):
        best = np.full(n_h + 1, np.inf)
        arg = np.zeros(n_h + 1, dtype=np.int32)
        for offset in range(reach, -reach - 1, -1):
            cand = np.full(n_h + 1, np.inf)
            if offset >= 0:
                cand[offset:] = value[:n_h + 1 - offset]
            else:
                cand[:offset] = value[-offset:]
            cand = cand + (offset * delta) ** 2 / (2 * dt)
            better = cand < best
            best = np.where(better, cand, best)
            arg = np.where(better, offset, arg)
        value = best
        choice[step] = arg
    nodes = np.empty(n_time + 1, dtype=int)
    nodes[-1] = n_h
    for step in range(n_time - 1, -1, -1):
        nodes[step] = nodes[step + 1] - choice[step, nodes[step + 1]]
    return float(value[n_h]), nodes


def _shooting_residual(table, h0, h1, energy, horizon):
    """Integrate phi' = +-sqrt(2E) B(phi) from h0 and compare phi(T) with h1."""
    if float(table.b2(h0)) <= get_setting('b2_floor'):
        return None
    sign = 1.0 if h1 > h0 else -1.0
    lo, hi = table.span

    def rhs(t, y):
        return [sign * math.sqrt(2 * energy * max(float(table.b2(min(max(y[0], lo), hi))), 0.0))]

    sol = solve_ivp(rhs, (0.0, horizon), [h0], method='DOP853', rtol=1e-10, atol=1e-12)
    return float(abs(sol.y[0, -1] - h1))


def minimize_action(tables, graph, y0, y1, horizon, n_time=400, n_h=400, b2_floor=None):
    """Minimum action over graph paths from y0 to y1 on [0, horizon]."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if graph_distance(graph, y0, y1) == 0.0:
        return _constant_result(graph, y0, horizon, n_time)

    profile = RouteProfile.build(tables, graph, y0, y1, n_h=n_h, b2_floor=b2_floor)
    length = profile.length
    action_value = length ** 2 / (2 * horizon)
    energy = length ** 2 / (2 * horizon ** 2)
    path = profile.path(horizon, n_time)
    stage = 'single_edge' if len(profile.legs) == 1 else 'cross_vertex'

    dp_value, dp_nodes = route_dp(profile, horizon, n_time, n_h)
    dp_edges, dp_h, dp_at = profile.locate(dp_nodes * length / n_h)
    dp_path = GraphPath(graph, path.times, dp_edges, dp_h, dp_at)

    lagr = first_integral(tables, path)
    finite = lagr[np.isfinite(lagr)]
    diagnostics = {
        'stage': stage,
        'route_length_f': length,
        'legs': [{'edge': leg.edge_id, 'h_start': leg.h_start, 'h_end': leg.h_end,
                  'f_length': leg.f_length, 'duration': horizon * leg.f_length / length}
                 for leg in profile.legs],
        'dp_action': dp_value,
        'dp_rel_diff': abs(dp_value - action_value) / action_value,
        'first_integral_cv': float(np.std(finite) / np.mean(finite)) if len(finite) else None,
        'shooting_residual': (_shooting_residual(_table(tables, y0.edge_id), y0.h, y1.h, energy, horizon)
                              if stage == 'single_edge' else None),
    }
    diagnostics['dp_path'] = dp_path
    action = ActionValue(action_value, np.full(n_time, action_value / n_time), 0.0)
    logger.info(f"Minimum action {action_value:.6g} ({stage}, E={energy:.6g}, DP rel. diff "
                f"{diagnostics['dp_rel_diff']:.2e})")
    return MinActionResult(path, action, energy, diagnostics, profile)


def first_integral(tables, path):
    """1/2 phi'^2 / B^2 at cell midpoints of single-edge cells."""
    out = np.full(len(path) - 1, np.nan)
    for m in range(len(path) - 1):
        if path.edge_ids[m] != path.edge_ids[m + 1]:
            continue
        table = _table(tables, path.edge_ids[m])
        mid = 0.5 * (path.h[m] + path.h[m + 1])
        b2 = float(table.b2(mid))
        if b2 > 0 and table.vertex_end(path.h[m]) is None and table.vertex_end(path.h[m + 1]) is None:
            speed = (path.h[m + 1] - path.h[m]) / (path.times[m + 1] - path.times[m])
            out[m] = 0.5 * speed ** 2 / b2
    return out


@dataclass
class ZeroSpeedReport:
    status: str
    reason: str = ''
    n_times: tuple = ()
    quotients: tuple = ()
    exponent: float = float('nan')
    action: object = None

    @property
    def passed(self):
        return self.status == 'passed'

    def to_json(self):
        return {
            'status': self.status, 'reason': self.reason, 'n_times': list(self.n_times),
            'quotients': list(self.quotients),
            'exponent': None if math.isnan(self.exponent) else self.exponent,
            'action': self.action,
        }


def zero_speed_at_exterior_vertex_check(result, tables=None, refinements=(100, 1000, 10000)):
    """Departure speed from an extremum vertex must vanish under time refinement.

    ``result`` is a MinActionResult (refined through its route) or a plain
    GraphPath (refined by graph-linear resampling).
    """
    if isinstance(result, MinActionResult):
        path = result.path
        sampler = result.sample
    else:
        path = result

        def sampler(n):
            return path.resample(np.linspace(path.times[0], path.times[-1], n + 1))

    graph = path.graph
    start = path.point(0)
    ends = [v for v in graph.vertices_at(start.h) if v in graph.edges[start.edge_id].endpoints]
    if not ends:
        return ZeroSpeedReport('skipped', 'path does not start at a vertex')
    if graph.vertices[ends[0]].kind != 'exterior':
        return ZeroSpeedReport('skipped', 'start vertex is interior')

    quotients = []
    for n in refinements:
        p = sampler(n)
        quotients.append(abs(p.h[1] - p.h[0]) / (p.times[1] - p.times[0]))
    dts = path.horizon / np.asarray(refinements, dtype=float)
    q = np.asarray(quotients)
    if np.all(q == 0):
        exponent = math.inf
    elif np.any(q == 0):
        exponent = float('nan')
    else:
        exponent = float(np.polyfit(np.log(dts), np.log(q), 1)[0])
    action = evaluate_action(tables, path).value if tables is not None else None
    passed = exponent == math.inf or (not math.isnan(exponent) and exponent > 0.1)
    report = ZeroSpeedReport('passed' if passed else 'violated', '', tuple(refinements),
                             tuple(float(x) for x in q), exponent, action)
    if not passed:
        logger.warning(f"Departure speed from exterior vertex {ends[0]} does not vanish "
                       f"(exponent {exponent:.3g})")
    return report


def tube_infimum_action(tables, graph, phi, delta, n_time=400, n_h=400):
    """Infimum of S over paths that start at phi(0) and end within delta of phi(T).

    The terminal point moves delta toward phi(0) along the route; the start
    stays pinned because the process starts there.
    """
    y0, y1 = phi.point(0), phi.point(len(phi) - 1)
    gap = graph_distance(graph, y0, y1)
    if gap <= delta:
        return _constant_result(graph, y0, phi.horizon, n_time)
    target = graph.point_toward(y1, y0, delta)
    return minimize_action(tables, graph, y0, target, phi.horizon, n_time=n_time, n_h=n_h)
