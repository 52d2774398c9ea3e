"""Monte Carlo checks of the large-deviation rate and of the lemma-level estimates.

Tube probabilities P(rho_0T(Y(X), phi) < delta) are estimated by naive Monte
Carlo along an epsilon ladder and -log p is regressed on eps^(-beta); the
slope is compared against the infimum of the action over the tube.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid
from scipy.stats import norm

from ..analysis.action_functional import tube_infimum_action
from ..analysis.reeb_graph import graph_distance, path_distance, project, project_batch, project_trajectory
from ..conf import get_setting
from ..errors import AllMisses, OutOfSpan, UncoveredEdge
from ..utils.logger import logger
from ..utils.parallel import serial_map
from .sde_sim import SimulationConfig, resolve_dt, simulate_batch

Z95 = float(norm.ppf(0.975))
AGREEMENT_BAND = 0.35
# quadratic variations below this count as zero
QV_ZERO = 1e-14


def wilson_interval(hits, n, z=Z95):
    if n <= 0:
        return 0.0, 1.0
    p = hits / n
    denom = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, centre - half), min(1.0, centre + half)


@dataclass
class RateFit:
    slope: float = None
    intercept: float = None
    slope_stderr: float = None
    residuals: tuple = ()
    n_points: int = 0

    @property
    def fitted(self):
        return self.slope is not None

    def to_json(self):
        return {
            'slope': self.slope, 'intercept': self.intercept, 'slope_stderr': self.slope_stderr,
            'residuals': list(self.residuals), 'n_points': self.n_points,
        }


def fit_rate(epsilons, p_hat, n, beta):
    """Weighted least squares of -log p on eps^(-beta) with an intercept.

    Weights are the inverse delta-method variances n p / (1 - p). Points with
    no hits are dropped; fewer than three remaining points give no slope.
    """
    eps = np.asarray(epsilons, dtype=float)
    p = np.asarray(p_hat, dtype=float)
    n = np.broadcast_to(np.asarray(n, dtype=float), p.shape)
    keep = p > 0
    if keep.sum() < 3:
        return RateFit(n_points=int(keep.sum()))
    eps, p, n = eps[keep], p[keep], n[keep]
    x = eps ** (-beta)
    y = -np.log(p)
    q = np.minimum(p, 1 - 0.5 / n)
    w = n * q / (1 - q)
    design = np.column_stack([x, np.ones_like(x)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(design * sw[:, None], y * sw, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    residuals = y - design @ coef
    dof = len(x) - 2
    stderr = None
    if dof > 0:
        sigma2 = float(np.sum(w * residuals ** 2) / dof)
        cov = sigma2 * np.linalg.inv(design.T @ (design * w[:, None]))
        stderr = float(np.sqrt(cov[0, 0]))
    return RateFit(slope, intercept, stderr, tuple(float(r) for r in residuals), len(x))


@dataclass(frozen=True, eq=False)
class TubeExperiment:
    reference: object
    delta: float
    epsilons: tuple
    beta: float
    samples: object
    x0: tuple
    seed: int = 0
    dt_fast: float = None
    scheme: str = 'rk4-em'

    def sample_counts(self):
        if np.isscalar(self.samples):
            return [int(self.samples)] * len(self.epsilons)
        return [int(s) for s in self.samples]

    def validate(self):
        if self.delta <= 0:
            raise ValueError("tube radius must be positive")
        eps = np.asarray(self.epsilons, dtype=float)
        if len(eps) == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
            raise ValueError("epsilon ladder must be positive and strictly decreasing")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        counts = self.sample_counts()
        if len(counts) != len(eps) or min(counts) < 1000:
            raise ValueError("need at least 1000 samples per epsilon")
        return self

    def to_json(self):
        return {
            'delta': self.delta, 'epsilons': list(self.epsilons), 'beta': self.beta,
            'samples': self.sample_counts(), 'x0': list(self.x0), 'seed': self.seed,
            'dt_fast': self.dt_fast, 'scheme': self.scheme, 'horizon': self.reference.horizon,
        }


@dataclass
class EpsilonResult:
    epsilon: float
    samples: int
    hits: int
    box_exits: int
    dt: float

    @property
    def p_hat(self):
        return self.hits / self.samples

    @property
    def interval(self):
        return wilson_interval(self.hits, self.samples)

    def to_json(self):
        lo, hi = self.interval
        return {
            'epsilon': self.epsilon, 'samples': self.samples, 'hits': self.hits, 'p_hat': self.p_hat,
            'ci_low': lo, 'ci_high': hi, 'box_exits': self.box_exits, 'dt': self.dt,
            'all_missed': self.hits == 0,
        }


@dataclass
class TubeEstimate:
    per_epsilon: list
    fit: RateFit
    s_reference: float = None
    beta: float = None

    @property
    def s_fit(self):
        return self.fit.slope

    @property
    def monotone(self):
        """p_hat is non-increasing as epsilon decreases along the ladder."""
        p = [r.p_hat for r in self.per_epsilon]
        return all(b <= a for a, b in zip(p, p[1:]))

    @property
    def verdict(self):
        if not self.fit.fitted or self.s_reference is None:
            return 'no_fit'
        slack = AGREEMENT_BAND * abs(self.s_reference)
        if self.fit.slope_stderr is not None:
            slack = max(slack, 2 * self.fit.slope_stderr)
        return 'agree' if abs(self.s_fit - self.s_reference) <= slack else 'disagree'

    def to_json(self):
        return {
            'per_epsilon': [r.to_json() for r in self.per_epsilon],
            's_fit': self.s_fit,
            's_reference': self.s_reference,
            'fit': self.fit.to_json(),
            'monotone': self.monotone,
            'verdict': self.verdict,
        }


def _min_rotation_time(tables, path):
    t_min = math.inf
    for e in np.unique(path.edge_ids):
        table = tables.get(int(e))
        if table is None:
            raise UncoveredEdge("no coefficient table for edge of the reference path", edge=int(e))
        hs = path.h[path.edge_ids == e]
        inner = hs[[table.vertex_end(h) is None for h in hs]]
        values = table.t(inner) if len(inner) else table.t_values
        t_min = min(t_min, float(np.min(values)))
    return t_min


def _sim_config(exp, epsilon, dt):
    return SimulationConfig(
        epsilon=float(epsilon), beta=exp.beta, horizon=exp.reference.horizon, dt_fast=dt,
        x0=tuple(exp.x0), seed=exp.seed, scheme=exp.scheme,
    )


def _tube_distances(system, graph, reference, batch):
    edges, hs, _ = project_batch(system, graph, batch.states)
    ref = reference.resample(reference.times[0] + batch.times)
    d = graph.distance(edges, hs, ref.edge_ids[None, :], ref.h[None, :])
    rho = d.max(axis=1)
    return np.where(batch.exited, np.inf, rho)


def _tube_task(task):
    system, graph, reference, config, delta, n, block = task
    batch = simulate_batch(system, config, n, block=block)
    rho = _tube_distances(system, graph, reference, batch)
    return int(np.sum(rho < delta)), int(batch.exited.sum())


def _blocks(n):
    size = get_setting('rng_block')
    return [min(size, n - start) for start in range(0, n, size)]


def _check_start(system, graph, exp):
    start = project(system, graph, exp.x0)
    gap = graph_distance(graph, start, exp.reference.point(0))
    if gap > 1e-9 * (1 + abs(start.h)):
        raise ValueError(f"reference path must start at the projection of x0 (gap {gap:.3g})")


def estimate_tube(system, graph, tables, exp, pmap=serial_map, n_time=400, n_h=400):
    """Tube probabilities along the ladder, the rate fit and the tube-infimum reference."""
    exp.validate()
    _check_start(system, graph, exp)
    t_min = _min_rotation_time(tables, exp.reference)
    results = []
    for i, (eps, n) in enumerate(zip(exp.epsilons, exp.sample_counts())):
        dt = resolve_dt(eps, exp.beta, t_min, exp.dt_fast)
        config = _sim_config(exp, eps, dt).validate()
        tasks = [(system, graph, exp.reference, config, exp.delta, size, f"{i}:{b}")
                 for b, size in enumerate(_blocks(n))]
        hits, exits = 0, 0
        for h, x in pmap(_tube_task, tasks):
            hits += h
            exits += x
        result = EpsilonResult(float(eps), n, hits, exits, config.dt)
        results.append(result)
        if hits == 0:
            logger.warning(f"No trajectory stayed in the tube at eps={eps}")
        logger.info(f"eps={eps}: {hits}/{n} hits, p_hat={result.p_hat:.4g}")
    if all(r.hits == 0 for r in results):
        raise AllMisses("no hits at any epsilon", delta=exp.delta, epsilons=tuple(exp.epsilons))

    fit = fit_rate([r.epsilon for r in results], [r.p_hat for r in results],
                   [r.samples for r in results], exp.beta)
    reference = tube_infimum_action(tables, graph, exp.reference, exp.delta, n_time=n_time, n_h=n_h)
    estimate = TubeEstimate(results, fit, float(reference.action.value), exp.beta)
    if not fit.fitted:
        logger.warning(f"Rate fit needs 3 ladder points with hits, got {fit.n_points}")
    else:
        logger.info(f"S_fit={estimate.s_fit:.4g}, tube infimum S={estimate.s_reference:.4g}: {estimate.verdict}")
    return estimate


@dataclass
class RecheckReport:
    epsilon: float
    checked: int
    mismatches: int
    indices: list = field(default_factory=list)

    @property
    def passed(self):
        return self.mismatches == 0


def recheck_hits(system, graph, exp, epsilon_index, fraction=0.01, t_min=None, tables=None):
    """Recount hits one trajectory at a time through ``project_trajectory`` and ``path_distance``.

    Every ``1/fraction``-th trajectory of each block is compared against the
    vectorized count; the two must agree exactly.
    """
    exp.validate()
    if t_min is None:
        t_min = _min_rotation_time(tables, exp.reference)
    eps = exp.epsilons[epsilon_index]
    n = exp.sample_counts()[epsilon_index]
    config = _sim_config(exp, eps, resolve_dt(eps, exp.beta, t_min, exp.dt_fast)).validate()
    stride = max(1, int(round(1 / fraction)))
    checked, bad = 0, []
    for b, size in enumerate(_blocks(n)):
        batch = simulate_batch(system, config, size, block=f"{epsilon_index}:{b}")
        fast = _tube_distances(system, graph, exp.reference, batch) < exp.delta
        for k in range(0, size, stride):
            if batch.exited[k]:
                slow = False
            else:
                path = project_trajectory(system, graph, batch.states[k],
                                          times=exp.reference.times[0] + batch.times)
                slow = path_distance(path, exp.reference) < exp.delta
            checked += 1
            if slow != fast[k]:
                bad.append((b, k))
    if bad:
        logger.warning(f"Hit recount disagrees on {len(bad)}/{checked} trajectories at eps={eps}")
    return RecheckReport(float(eps), checked, len(bad), bad)


@dataclass
class EscapeReport:
    k_grid: tuple
    probabilities: tuple
    std_errors: tuple
    n_paths: int
    epsilon: float
    beta: float

    @property
    def smallest_k(self):
        """Smallest tested k with estimated P(tau_1 < T) >= 1/2."""
        for k, p in zip(self.k_grid, self.probabilities):
            if p >= 0.5:
                return k
        return None

    @property
    def monotone(self):
        """Non-increasing in k up to two standard errors."""
        p, se = np.asarray(self.probabilities), np.asarray(self.std_errors)
        return bool(np.all(np.diff(p) <= 2 * np.hypot(se[1:], se[:-1]) + 1e-15))

    @property
    def passed(self):
        return self.smallest_k is not None

    def to_json(self):
        return {
            'k_grid': list(self.k_grid), 'probabilities': list(self.probabilities),
            'std_errors': list(self.std_errors), 'n_paths': self.n_paths,
            'epsilon': self.epsilon, 'beta': self.beta,
            'smallest_k': self.smallest_k, 'monotone': self.monotone,
        }


def _escape_task(task):
    system, config, h_vertex, n, block = task
    batch = simulate_batch(system, config, n, block=block)
    return np.max(np.abs(batch.h - h_vertex), axis=1)


def escape_extremum_probe(system, graph, config, k_grid, n_paths=10_000, pmap=serial_map):
    """P(tau_1 < T) for tau_1 the first time |H - H(O)| reaches k eps^beta.

    ``config.x0`` must be the critical point of an exterior vertex O. The
    level is monitored on the simulation grid.
    """
    x0 = np.asarray(config.x0, dtype=float)
    exterior = [v for v in graph.vertices if v.kind == 'exterior']
    vertex = min(exterior, key=lambda v: np.hypot(*(x0 - v.location)))
    if np.hypot(*(x0 - vertex.location)) > 1e-9 * system.scale:
        raise ValueError("escape probe must start at the critical point of an exterior vertex")
    config = replace(config, record_stride=1).validate()
    k_grid = tuple(sorted(float(k) for k in k_grid))
    tasks = [(system, config, vertex.h_value, size, f"escape:{b}") for b, size in enumerate(_blocks(n_paths))]
    peak = np.concatenate(pmap(_escape_task, tasks))
    levels = np.asarray(k_grid) * config.epsilon ** config.beta
    hit = peak[:, None] >= levels[None, :]
    p = hit.mean(axis=0)
    se = np.sqrt(p * (1 - p) / n_paths)
    report = EscapeReport(k_grid, tuple(float(x) for x in p), tuple(float(x) for x in se), n_paths,
                          config.epsilon, config.beta)
    if report.smallest_k is None:
        logger.warning(f"No tested k reaches P >= 1/2 at eps={config.epsilon}")
    return report


@dataclass
class QuadraticVariationReport:
    realized: float
    predicted: float
    ratio: float
    std_error: float = 0.0
    n_paths: int = 1

    @property
    def both_zero(self):
        return abs(self.realized) <= QV_ZERO and abs(self.predicted) <= QV_ZERO

    def within(self, lo, hi):
        return self.both_zero or (math.isfinite(self.ratio) and lo <= self.ratio <= hi)

    def to_json(self):
        return {
            'realized': self.realized, 'predicted': self.predicted,
            'ratio': self.ratio if math.isfinite(self.ratio) else None,
            'std_error': self.std_error, 'n_paths': self.n_paths, 'both_zero': self.both_zero,
        }


def _b2_along(tables, edges, hs):
    out = np.empty(hs.shape)
    for e in np.unique(edges):
        table = tables.get(int(e))
        if table is None:
            raise UncoveredEdge("trajectory visits an edge without a coefficient table", edge=int(e))
        mask = edges == e
        lo, hi = table.span
        if np.any(hs[mask] < lo - 1e-9) or np.any(hs[mask] > hi + 1e-9):
            raise OutOfSpan("trajectory leaves the tabulated span", edge=int(e), span=table.span)
        out[mask] = table.b2(hs[mask])
    return out


def _edges_for(tables, hs, system, graph, states):
    if graph is not None:
        edges, _, _ = project_batch(system, graph, states)
        return edges
    if len(tables) != 1:
        raise ValueError("pass the system and graph to project trajectories over several edges")
    return np.full(hs.shape, next(iter(tables)))


def quadratic_variation_check(record, tables, system=None, graph=None):
    """Realized quadratic variation of H against eps^beta int B^2(H_s) ds for one record.

    Times are taken on the rescaled scale.
    """
    if record.graph_path is not None:
        edges, hs = record.graph_path.edge_ids, record.graph_path.h
    else:
        hs = record.h_series
        edges = _edges_for(tables, hs[None, :], system, graph, record.states[None])[0]
    b2 = _b2_along(tables, edges, hs)
    predicted = record.epsilon ** record.beta * float(trapezoid(b2, record.times))
    realized = float(record.qv_series[-1])
    ratio = realized / predicted if predicted > 0 else math.nan
    return QuadraticVariationReport(realized, predicted, ratio)


def quadratic_variation_batch(batch, tables, system=None, graph=None):
    """Mean per-path ratio over the paths of a batch that stayed in the box."""
    keep = ~batch.exited
    if not np.any(keep):
        raise AllMisses("every trajectory left the box")
    hs = batch.h[keep]
    edges = _edges_for(tables, hs, system, graph, batch.states[keep])
    b2 = _b2_along(tables, edges, hs)
    cfg = batch.config
    predicted = cfg.epsilon ** cfg.beta * trapezoid(b2, batch.times, axis=1)
    realized = batch.qv[keep, -1]
    if np.all(np.abs(predicted) <= QV_ZERO) and np.all(np.abs(realized) <= QV_ZERO):
        return QuadraticVariationReport(0.0, 0.0, math.nan, 0.0, int(keep.sum()))
    ratios = realized / predicted
    n = len(ratios)
    return QuadraticVariationReport(
        float(realized.mean()), float(predicted.mean()), float(ratios.mean()),
        float(ratios.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0, n,
    )
