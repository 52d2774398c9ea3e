"""Rotation time T(H) and averaged diffusion B^2(H) along the edges of the Reeb graph."""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from ..conf import get_setting
from ..errors import BadKind, DegenerateCurve, GuardBand, NoClosure, OutOfSpan
from ..numerics.runge_kutta import DormandPrince, hermite
from ..utils.logger import logger
from ..utils.parallel import serial_map
from .reeb_graph import refine_onto_level


@dataclass(frozen=True)
class CoeffSample:
    t: float
    b2: float


@dataclass(frozen=True, eq=False)
class LevelCurve:
    """Closed level curve sampled uniformly in arc length; knots keep the traced Hermite data."""

    edge_id: int
    level: float
    points: np.ndarray
    length: float
    residual: float
    closure_error: float
    n_steps: int
    knots_s: np.ndarray = field(repr=False)
    knots_y: np.ndarray = field(repr=False)
    knots_f: np.ndarray = field(repr=False)

    def with_resolution(self, system, n):
        pts = _sample_closed(system, self.level, self.knots_s, self.knots_y, self.knots_f, n)
        return LevelCurve(self.edge_id, self.level, pts, self.length,
                          float(np.max(np.abs(system.h(pts) - self.level))),
                          self.closure_error, self.n_steps, self.knots_s, self.knots_y, self.knots_f)

    def contains(self, point):
        """Even-odd point-in-polygon test."""
        x, y = point
        px, py = self.points[:, 0], self.points[:, 1]
        qx, qy = np.roll(px, -1), np.roll(py, -1)
        crosses = (py > y) != (qy > y)
        with np.errstate(divide='ignore', invalid='ignore'):
            at = px + (y - py) * (qx - px) / (qy - py)
        return bool(np.sum(crosses & (x < at)) % 2)


def edge_seed(system, graph, edge_id, h):
    """A point of the edge's curve at level h, by following grad H / |grad H|^2 from the edge anchor."""
    edge = graph.edges[edge_id]
    anchor = np.asarray(edge.anchor, dtype=float)
    if h != edge.anchor_level:
        def rhs(level, y):
            g = system.grad(y)
            return g / np.dot(g, g)
        sol = solve_ivp(rhs, (edge.anchor_level, h), anchor, rtol=1e-10, atol=1e-12)
        anchor = sol.y[:, -1]
    return refine_onto_level(system, anchor, h)


def _check_guard(graph, edge_id, h, guard):
    edge = graph.edges[edge_id]
    if h - edge.h_lo < guard:
        raise GuardBand("level too close to the lower vertex value", edge=edge_id, h=h, vertex=edge.v_lo)
    if edge.bounded and edge.h_hi - h < guard:
        raise GuardBand("level too close to the upper vertex value", edge=edge_id, h=h, vertex=edge.v_hi)
    if not edge.bounded and h >= graph.h_max:
        raise GuardBand("level above the box truncation", edge=edge_id, h=h, h_max=graph.h_max)


def _project_rows(system, pts, level, iters=2):
    for _ in range(iters):
        g = system.grad(pts)
        pts = pts - ((system.h(pts) - level) / np.sum(g * g, axis=-1))[:, None] * g
    return pts


def _sample_closed(system, level, s, ys, fs, n):
    total = s[-1]
    u = total * np.arange(n) / n
    k = np.clip(np.searchsorted(s, u, side='right') - 1, 0, len(s) - 2)
    width = s[k + 1] - s[k]
    theta = (u - s[k]) / width
    pts = hermite(ys[k], fs[k], ys[k + 1], fs[k + 1], width[:, None], theta)
    return _project_rows(system, pts, level)


def trace_level_curve(system, graph, edge_id, h, tol=None, seed=None, max_steps=200_000):
    """Trace the closed curve of edge ``edge_id`` at level ``h`` with Dormand-Prince steps."""
    tol = float(tol or get_setting('trace_tol'))
    _check_guard(graph, edge_id, h, 10 * tol)
    x0 = refine_onto_level(system, seed, h) if seed is not None else edge_seed(system, graph, edge_id, h)

    def tangent(y):
        v = system.perp_grad(y)
        return v / np.hypot(v[0], v[1])

    rk = DormandPrince(rtol=1e-10, atol=0.1 * tol, h_max=0.05 * system.scale)
    t0 = tangent(x0)
    knots_s, knots_y, knots_f = [0.0], [x0], [t0]
    y, f, arc = x0, t0, 0.0
    step = 1e-3 * system.scale
    section_prev = 0.0
    for n_steps in range(1, max_steps + 1):
        res = rk.advance(tangent, y, step)
        y_new = refine_onto_level(system, res.y, h, iters=1)
        f_new = tangent(y_new)
        section = float(np.dot(y_new - x0, t0))
        if arc + res.h >= 10 * tol and section_prev < 0 <= section:
            def along(theta):
                return float(np.dot(hermite(y, f, y_new, f_new, res.h, theta) - x0, t0))
            theta = brentq(along, 0.0, 1.0, xtol=1e-15) if along(0.0) < 0 else 0.0
            gap = float(np.hypot(*(hermite(y, f, y_new, f_new, res.h, theta) - x0)))
            if gap <= max(10 * tol, 0.05 * res.h):
                knots_s.append(arc + theta * res.h)
                knots_y.append(x0)
                knots_f.append(t0)
                break
        arc += res.h
        knots_s.append(arc)
        knots_y.append(y_new)
        knots_f.append(f_new)
        y, f, step, section_prev = y_new, f_new, res.h_next, section
    else:
        raise NoClosure("level curve did not close within the step budget", edge=edge_id, h=h,
                        steps=max_steps)

    s = np.array(knots_s)
    ys = np.array(knots_y)
    fs = np.array(knots_f)
    n = 256
    pts = _sample_closed(system, h, s, ys, fs, n)
    t_prev = np.sum(1.0 / np.linalg.norm(system.grad(pts), axis=-1)) / n
    while n < 2 ** 16:
        n *= 2
        pts = _sample_closed(system, h, s, ys, fs, n)
        t_cur = np.sum(1.0 / np.linalg.norm(system.grad(pts), axis=-1)) / n
        if abs(t_cur - t_prev) <= 1e-11 * abs(t_cur):
            break
        t_prev = t_cur
    residual = float(np.max(np.abs(system.h(pts) - h)))
    return LevelCurve(edge_id, float(h), pts, float(s[-1]), residual, gap, n_steps, s, ys, fs)


def compute_coeffs(system, curve):
    """Arc-length quadrature of T = int dl/|grad H| and B^2 = (1/T) int |grad H^* sigma|^2 dl/|grad H|."""
    pts = curve.points
    speed = np.linalg.norm(system.grad(pts), axis=-1)
    if speed.min() < 1e-9:
        raise DegenerateCurve("gradient vanishes on the level curve", edge=curve.edge_id, h=curve.level,
                              min_grad=float(speed.min()))
    weight = curve.length / len(pts)
    t = float(np.sum(weight / speed))
    b2 = float(np.sum(weight * system.g2(pts) / speed) / t)
    return CoeffSample(t, b2)


def flow_time_coeffs(system, x0, max_periods=100):
    """Period of x' = grad^perp H through x0 and the time average of |grad H^* sigma|^2."""
    x0 = np.asarray(x0, dtype=float)
    v0 = system.perp_grad(x0)
    speed0 = np.hypot(*v0)
    if speed0 < 1e-9:
        raise DegenerateCurve("start point is critical", point=tuple(x0))

    def rhs(t, y):
        v = system.perp_grad(y[:2])
        return [v[0], v[1], system.g2(y[:2])]

    def section(t, y):
        return np.dot(y[:2] - x0, v0)
    section.direction = 1

    # leave the section before watching for the return
    lead = 1e-3 * system.scale / speed0
    sol = solve_ivp(rhs, (0.0, lead), [*x0, 0.0], method='DOP853', rtol=1e-12, atol=1e-14)
    t_start, y_start = lead, sol.y[:, -1]
    chunk = 10 * system.scale / speed0
    for _ in range(max_periods):
        sol = solve_ivp(rhs, (t_start, t_start + chunk), y_start, method='DOP853',
                        rtol=1e-12, atol=1e-14, events=section)
        for t_ev, y_ev in zip(sol.t_events[0], sol.y_events[0]):
            if np.hypot(*(y_ev[:2] - x0)) <= 1e-3 * system.scale:
                return CoeffSample(float(t_ev), float(y_ev[2] / t_ev))
        t_start, y_start = sol.t[-1], sol.y[:, -1]
    raise NoClosure("flow did not return to the start point", point=tuple(x0))


def rotation_time_limit(system, extremum):
    """Limit of T(H) at an extremum: 2 pi / sqrt(det Hess)."""
    if not extremum.is_extremum:
        raise BadKind("rotation time has a finite limit only at extrema", kind=extremum.kind)
    lam1, lam2 = extremum.hess_eigenvalues
    return float(2 * np.pi / np.sqrt(lam1 * lam2))


@dataclass(frozen=True, eq=False)
class EdgeCoefficientTable:
    """Tabulated T and B^2 on one edge with monotone cubic interpolation.

    ``lo_end``/``hi_end`` are 'extremum', 'saddle' or 'open' (the truncated
    unbounded end). B^2 is pinned to 0 at vertex ends; T is pinned to the
    rotation-time limit at extrema and follows the fitted log law inside the
    guard band of a saddle.
    """

    edge_id: int
    h_grid: np.ndarray
    t_values: np.ndarray
    b2_values: np.ndarray
    span: tuple
    lo_end: str
    hi_end: str
    t_limit_lo: float
    t_limit_hi: float
    saddle_fits: dict
    _t_interp: object = field(init=False, repr=False)
    _b2_interp: object = field(init=False, repr=False)

    def __post_init__(self):
        lo, hi = self.span
        h_b2, v_b2 = [self.h_grid], [self.b2_values]
        h_t, v_t = [self.h_grid], [self.t_values]
        if self.lo_end != 'open':
            h_b2.insert(0, [lo])
            v_b2.insert(0, [0.0])
        if self.hi_end != 'open':
            h_b2.append([hi])
            v_b2.append([0.0])
        if self.lo_end == 'extremum':
            h_t.insert(0, [lo])
            v_t.insert(0, [self.t_limit_lo])
        if self.hi_end == 'extremum':
            h_t.append([hi])
            v_t.append([self.t_limit_hi])
        object.__setattr__(self, '_b2_interp', PchipInterpolator(np.concatenate(h_b2), np.concatenate(v_b2)))
        object.__setattr__(self, '_t_interp', PchipInterpolator(np.concatenate(h_t), np.concatenate(v_t)))

    def covers(self, h, tol=1e-12):
        lo, hi = self.span
        return lo - tol <= h <= hi + tol

    def vertex_end(self, h):
        """'lo'/'hi' if h sits on a vertex end of the span, else None."""
        lo, hi = self.span
        if self.lo_end != 'open' and abs(h - lo) <= 1e-12 * max(1.0, abs(lo)):
            return 'lo'
        if self.hi_end != 'open' and abs(h - hi) <= 1e-12 * max(1.0, abs(hi)):
            return 'hi'
        return None

    def b2(self, h):
        h = np.asarray(h, dtype=float)
        lo, hi = self.span
        return np.maximum(self._b2_interp(np.clip(h, lo, hi)), 0.0)

    def t(self, h):
        h = np.asarray(h, dtype=float)
        lo, hi = self.span
        out = np.asarray(self._t_interp(np.clip(h, self.h_grid[0] if self.lo_end == 'saddle' else lo,
                                                self.h_grid[-1] if self.hi_end == 'saddle' else hi)))
        for end, vertex, inner in (('lo', lo, self.h_grid[0]), ('hi', hi, self.h_grid[-1])):
            fit = self.saddle_fits.get(end)
            if fit is None:
                continue
            band = (h < inner) if end == 'lo' else (h > inner)
            with np.errstate(divide='ignore'):
                law = fit['a'] + fit['b'] * np.abs(np.log(np.abs(h - vertex)))
            out = np.where(band, law, out)
        return out

    def to_rows(self):
        return [(self.edge_id, float(h), float(t), float(b2))
                for h, t, b2 in zip(self.h_grid, self.t_values, self.b2_values)]


def coeff_lookup(table, h):
    if not table.covers(h):
        raise OutOfSpan("level outside the tabulated span", edge=table.edge_id, h=h, span=table.span)
    end = table.vertex_end(h)
    if end is not None:
        limit = table.t_limit_lo if end == 'lo' else table.t_limit_hi
        return CoeffSample(float(limit), 0.0)
    return CoeffSample(float(table.t(h)), float(table.b2(h)))


def energy_grid(lo, hi, lo_vertex, hi_vertex, n_interior, guard):
    """Interior linspace plus geometric refinement toward vertex ends down to ``guard``."""
    parts = [np.linspace(lo, hi, n_interior + 2)[1:-1]]
    half = 0.5 * (hi - lo)
    steps = guard * 2.0 ** np.arange(0, 60)
    steps = steps[steps < half]
    if lo_vertex:
        parts.append(lo + steps)
    if hi_vertex:
        parts.append(hi - steps)
    else:
        parts.append([hi])
    grid = np.unique(np.concatenate(parts))
    keep = np.concatenate([[True], np.diff(grid) > 1e-12 * max(1.0, abs(hi))])
    return grid[keep]


def _levels_task(task):
    system, graph, edge_id, levels, tol = task
    out = []
    for h in levels:
        c = compute_coeffs(system, trace_level_curve(system, graph, edge_id, h, tol=tol))
        out.append((c.t, c.b2))
    return out


def _saddle_fit(h, t, b2, vertex_value, guard):
    d = np.abs(h - vertex_value)
    sel = (d >= guard * (1 - 1e-9)) & (d <= 10 * guard * (1 + 1e-9))
    if sel.sum() < 3:
        return None
    x = np.abs(np.log(d[sel]))
    b, a = np.polyfit(x, t[sel], 1)
    pred = a + b * x
    ss_res = float(np.sum((t[sel] - pred) ** 2))
    ss_tot = float(np.sum((t[sel] - t[sel].mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    slope = float(np.polyfit(np.log(d[sel]), np.log(b2[sel]), 1)[0]) if np.all(b2[sel] > 0) else float('nan')
    return {
        'a': float(a), 'b': float(b), 'r2': r2,
        'b2_loglog_slope': slope,
        'b2_times_log': float(np.mean(b2[sel] * x)),
    }


def tabulate_edge(system, graph, edge_id, n_interior=None, guard=None, tol=None, pmap=serial_map):
    """Trace and integrate on a refined energy grid of one edge and build the interpolants."""
    n_interior = int(n_interior or get_setting('n_interior'))
    guard = float(guard or get_setting('guard'))
    tol = float(tol or get_setting('trace_tol'))
    if n_interior < 16:
        raise ValueError("n_interior must be at least 16")
    edge = graph.edges[edge_id]
    lo = edge.h_lo
    if edge.bounded:
        hi = edge.h_hi
    else:
        hi = lo + 0.98 * (graph.h_max - lo)
    grid = energy_grid(lo, hi, True, edge.bounded, n_interior, guard)

    n_chunks = max(1, min(len(grid), getattr(pmap, 'threads', 1) * 4))
    chunks = [c for c in np.array_split(grid, n_chunks) if len(c)]
    results = pmap(_levels_task, [(system, graph, edge_id, c, tol) for c in chunks])
    values = np.array([v for chunk in results for v in chunk])
    t_values, b2_values = values[:, 0], values[:, 1]

    def end_kind(vertex_id):
        if vertex_id is None:
            return 'open'
        return 'extremum' if graph.vertices[vertex_id].kind == 'exterior' else 'saddle'

    lo_end, hi_end = end_kind(edge.v_lo), end_kind(edge.v_hi)
    limits = {}
    fits = {}
    for end, vertex_id, value in (('lo', edge.v_lo, lo), ('hi', edge.v_hi, hi)):
        kind = end_kind(vertex_id)
        if kind == 'extremum':
            limits[end] = rotation_time_limit(system, graph.vertices[vertex_id].critical)
        elif kind == 'saddle':
            limits[end] = float('inf')
            fit = _saddle_fit(grid, t_values, b2_values, value, guard)
            if fit is not None:
                fits[end] = fit
                if fit['r2'] < 0.99:
                    logger.warning(f"Edge {edge_id}: log-law fit of T near the saddle at H={value:.6g} "
                                   f"has R^2={fit['r2']:.4f}")
        else:
            limits[end] = float('nan')

    if np.any(t_values <= 0) or np.any(b2_values < 0):
        logger.warning(f"Edge {edge_id}: non-positive coefficients in the table")
    table = EdgeCoefficientTable(
        edge_id=edge_id,
        h_grid=grid,
        t_values=t_values,
        b2_values=b2_values,
        span=(lo, hi),
        lo_end=lo_end,
        hi_end=hi_end,
        t_limit_lo=limits['lo'],
        t_limit_hi=limits['hi'],
        saddle_fits=fits,
    )
    logger.info(f"Tabulated edge {edge_id} on {len(grid)} levels in [{lo:.6g}, {hi:.6g}]")
    return table


def tabulate_graph(system, graph, edge_ids=None, pmap=serial_map, **kwargs):
    edge_ids = range(len(graph.edges)) if edge_ids is None else edge_ids
    return {e: tabulate_edge(system, graph, e, pmap=pmap, **kwargs) for e in edge_ids}


def lipschitz_constant(table, lo, hi, n=2001):
    """Largest difference quotient of T * B^2 on the closed interval [lo, hi]."""
    span_lo, span_hi = table.span
    if not (span_lo < lo < hi < span_hi):
        raise OutOfSpan("Lipschitz interval must lie strictly inside the span", span=table.span, lo=lo, hi=hi)
    h = np.linspace(lo, hi, n)
    tb2 = table.t(h) * table.b2(h)
    return float(np.max(np.abs(np.diff(tb2)) / np.diff(h)))
