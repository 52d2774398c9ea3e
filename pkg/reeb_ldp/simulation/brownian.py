"""Barrier events of a scaled one-dimensional Brownian motion near a saddle.

The escape estimates at an interior vertex reduce to events of the form

    X_T < end,   X_t < c_j for t in segment j,     X = eps^(beta/2) W,

with piecewise constant upper barriers. For one or two segments the
probability has a reflection-principle closed form (a one-dimensional
integral for two); the Monte Carlo estimate samples each segment exactly
through the Brownian-bridge maximum, or on an Euler grid with the bridge
crossing correction when ``n_steps`` is given.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.stats import norm

from ..conf import get_setting
from ..utils.logger import logger
from ..utils.parallel import serial_map
from ..utils.rng import stream

CASES = ('i', 'ii', 'iii', 'reflection')


@dataclass(frozen=True)
class BarrierEvent:
    """{X_T < end_below and X_t < upper on every segment} for X = scale * W."""

    scale: float
    segments: tuple
    end_below: float = np.inf

    @property
    def horizon(self):
        return self.segments[-1][1]

    def exact(self):
        """Reflection-principle probability; None beyond two segments."""
        if len(self.segments) > 2:
            return None
        (t0, t1, c1), *rest = self.segments
        if c1 <= 0:
            return 0.0
        v1 = self.scale ** 2 * (t1 - t0)
        if not rest:
            return _stay_below(0.0, c1, self.end_below, v1)
        (_, t2, c2), = rest
        v2 = self.scale ** 2 * (t2 - t1)
        s1 = np.sqrt(v1)

        def integrand(x):
            killed = norm.pdf(x, scale=s1) - norm.pdf(x - 2 * c1, scale=s1)
            return killed * _stay_below(x, c2, self.end_below, v2)

        upper = min(c1, c2)
        value, _ = quad(integrand, -np.inf, upper, epsabs=1e-14, epsrel=1e-10, limit=200)
        return float(value)


def _stay_below(x0, c, end, v):
    """P(max X < c, X_end < end) for a Brownian segment of variance v started at x0 < c."""
    if x0 >= c:
        return 0.0
    m = min(end, c)
    s = np.sqrt(v)
    return float(norm.cdf((m - x0) / s) - norm.cdf((m - 2 * c + x0) / s))


@dataclass(frozen=True)
class OracleParams:
    case: str
    epsilon: float = 0.05
    beta: float = 0.5
    horizon: float = 1.0
    a: float = 0.4
    d: float = 0.1
    kappa: float = 0.05
    amplitude: float = 1.5
    level: float = 1.0

    def validate(self):
        if self.case not in CASES:
            raise ValueError(f"case must be one of {CASES}")
        if self.case == 'reflection':
            if self.level <= 0 or self.horizon <= 0:
                raise ValueError("reflection check needs a positive level and horizon")
            return self
        if not 0 < self.epsilon < 1 or not 0 < self.beta < 1 or self.horizon <= 0:
            raise ValueError("need 0 < epsilon < 1, 0 < beta < 1 and a positive horizon")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive")
        if self.case == 'i' and not 0 < self.d < self.a < 0.5:
            raise ValueError("case (i) needs 0 < d < a < 1/2")
        if self.case == 'ii' and not 0 < self.d < min((1 / self.beta - 1) / 3, 0.5):
            raise ValueError("case (ii) needs 0 < d < min((1/beta - 1)/3, 1/2)")
        if self.case == 'iii':
            if not 0 < self.d < (1 / self.beta - 1) / 2:
                raise ValueError("case (iii) needs 0 < d < (1/beta - 1)/2")
            if self.amplitude < 0:
                raise ValueError("amplitude A must be non-negative")
        if self.case == 'ii' and self.epsilon ** (self.d * self.beta) >= self.horizon:
            raise ValueError("case (ii) needs eps^(d beta) < T")
        return self

    def event(self):
        """The barrier event and the lower bound it is compared against."""
        self.validate()
        if self.case == 'reflection':
            # P(max W >= b) = 1 - P(max W < b)
            return BarrierEvent(1.0, ((0.0, self.horizon, self.level),)), None
        eps, beta, T = self.epsilon, self.beta, self.horizon
        log_eps = abs(np.log(eps))
        scale = eps ** (beta / 2)
        if self.case == 'i':
            ad = self.a - self.d
            end = -4 * eps ** (ad * beta) * ad * beta * log_eps
            upper = 0.25 * self.a * beta * log_eps * eps ** (self.a * beta)
            bound = 2 * np.exp(-eps ** (-(1 - 2 * ad) * beta - self.kappa))
            return BarrierEvent(scale, ((0.0, T, upper),), end), bound
        if self.case == 'ii':
            d = self.d
            switch = eps ** (d * beta)
            end = -2 * (1 - d) * beta * eps ** ((1 - d) * beta / 2) * log_eps
            segments = (
                (0.0, switch, eps ** ((1 + d) * beta / 2)),
                (switch, T, -eps ** ((1 - d) * beta / 2)),
            )
            bound = 2 * np.exp(-eps ** (-2 * d * beta - self.kappa))
            return BarrierEvent(scale, segments, end), bound
        upper = 0.25 * self.d * beta * log_eps * eps ** (self.d * beta)
        bound = 2 * np.exp(-self.amplitude ** 2 / T * eps ** (-beta))
        return BarrierEvent(scale, ((0.0, T, upper),), -self.amplitude), bound

    def to_json(self):
        return dict(self.__dict__)


def _bridge_chunk(event, gen, n):
    x = np.zeros(n)
    alive = np.ones(n, dtype=bool)
    for t0, t1, c in event.segments:
        v = event.scale ** 2 * (t1 - t0)
        step = np.sqrt(v) * gen.standard_normal(n)
        u = gen.random(n)
        # maximum of the bridge from x to x + step
        peak = x + 0.5 * (step + np.sqrt(step * step - 2 * v * np.log1p(-u)))
        alive &= peak < c
        x = x + step
    return (alive & (x < event.end_below)).astype(float)


def _grid_chunk(event, gen, n, n_steps):
    x = np.zeros(n)
    weight = np.ones(n)
    horizon = event.horizon
    for t0, t1, c in event.segments:
        k = max(1, int(round(n_steps * (t1 - t0) / horizon)))
        v = event.scale ** 2 * (t1 - t0) / k
        for _ in range(k):
            x_new = x + np.sqrt(v) * gen.standard_normal(n)
            below = (x < c) & (x_new < c)
            cross = np.exp(-2 * np.maximum(c - x, 0) * np.maximum(c - x_new, 0) / v)
            weight = np.where(below, weight * (1 - cross), 0.0)
            x = x_new
    return weight * (x < event.end_below)


def _chunk_task(task):
    event, seed, label, index, n, n_steps = task
    gen = stream(seed, 'brownian', label, index)
    values = _bridge_chunk(event, gen, n) if n_steps is None else _grid_chunk(event, gen, n, n_steps)
    return float(np.sum(values)), float(np.sum(values * values))


def estimate_event(event, n_paths, seed=0, label='event', n_steps=None, pmap=serial_map):
    """Monte Carlo estimate and standard error of the event probability."""
    block = get_setting('rng_block') * 64
    sizes = [min(block, n_paths - start) for start in range(0, n_paths, block)]
    tasks = [(event, seed, label, i, n, n_steps) for i, n in enumerate(sizes)]
    total, total_sq = 0.0, 0.0
    for s, sq in pmap(_chunk_task, tasks):
        total += s
        total_sq += sq
    mean = total / n_paths
    var = max(total_sq / n_paths - mean * mean, 0.0)
    return mean, float(np.sqrt(var / n_paths))


@dataclass
class BrownianReport:
    params: OracleParams
    probability: float
    std_error: float
    exact: float = None
    bound: float = None
    n_paths: int = 0
    method: str = 'bridge'
    segments: tuple = field(default=(), repr=False)

    @property
    def case(self):
        return self.params.case

    @property
    def vacuous(self):
        """A lower bound of 1 or more says nothing about a probability."""
        return self.bound is not None and self.bound >= 1.0

    @property
    def relative_error(self):
        if not self.exact:
            return None
        return abs(self.probability - self.exact) / self.exact

    @property
    def passed(self):
        if self.case == 'reflection':
            return self.relative_error is not None and self.relative_error <= 1e-2
        if self.vacuous:
            return False
        return self.probability >= self.bound

    def to_json(self):
        return {
            'case': self.case,
            'params': self.params.to_json(),
            'probability': self.probability,
            'std_error': self.std_error,
            'exact': self.exact,
            'bound': self.bound,
            'vacuous': self.vacuous,
            'passed': self.passed,
            'n_paths': self.n_paths,
            'method': self.method,
            'segments': [list(s) for s in self.segments],
        }


def brownian_saddle_oracle(params, n_paths=100_000, seed=0, n_steps=None, pmap=serial_map):
    """Estimate one barrier event and compare it with its lower bound.

    ``case='reflection'`` instead checks P(max_[0,T] W >= b) = 2 P(W_T >= b)
    against the Gaussian tail.
    """
    event, bound = params.event()
    method = 'bridge' if n_steps is None else 'grid'
    p, se = estimate_event(event, n_paths, seed, f'case-{params.case}', n_steps, pmap)
    exact = event.exact()
    if params.case == 'reflection':
        p = 1.0 - p
        exact = float(2 * norm.sf(params.level / np.sqrt(params.horizon)))
    report = BrownianReport(params, float(p), se, exact, bound, n_paths, method, event.segments)
    if report.vacuous:
        logger.warning(f"Case ({params.case}): lower bound {bound:.4g} is vacuous")
    elif not report.passed:
        logger.warning(
            f"Case ({params.case}): estimate {p:.4g} +/- {se:.2g} does not meet the bound "
            f"{bound if bound is not None else exact:.4g} at eps={params.epsilon}"
        )
    else:
        logger.info(f"Case ({params.case}): estimate {p:.4g} +/- {se:.2g} passes")
    return report
