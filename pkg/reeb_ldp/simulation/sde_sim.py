"""Simulation of the fast-rotating diffusion and of the unperturbed Hamiltonian flow.

The rescaled equation is

    dX = eps^(beta-1) grad^perp H(X) dt + eps^(beta/2) sigma(X) dW,

and ``timescale="original"`` runs dX = grad^perp H dt + sqrt(eps) sigma dW
on the stretched horizon T eps^(beta-1) with the same Gaussian draws, so the
two agree up to relabelling time.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import solve_ivp

from ..conf import get_setting
from ..errors import BoxExit, StepTooLarge
from ..utils.logger import logger
from ..utils.rng import stream

SCHEMES = ('rk4-em', 'em')
TIMESCALES = ('rescaled', 'original')


def resolve_dt(epsilon, beta, t_min, dt_user=None):
    """dt = min(dt_user, dt_factor * eps^(1-beta) * T_min), never above the c_dt ceiling."""
    scale = epsilon ** (1 - beta)
    dt = min(get_setting('dt_factor') * t_min, get_setting('c_dt')) * scale
    return dt if dt_user is None else min(float(dt_user), dt)


@dataclass(frozen=True)
class SimulationConfig:
    epsilon: float
    beta: float
    horizon: float
    dt_fast: float
    x0: tuple
    seed: int = 0
    record_stride: int = 1
    scheme: str = 'rk4-em'
    timescale: str = 'rescaled'

    def validate(self):
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.horizon <= 0 or self.dt_fast <= 0:
            raise ValueError("horizon and dt must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be at least 1")
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if self.timescale not in TIMESCALES:
            raise ValueError(f"timescale must be one of {TIMESCALES}")
        limit = get_setting('c_dt') * self.epsilon ** (1 - self.beta)
        if self.dt_fast > limit:
            raise StepTooLarge("dt does not resolve the fast rotation", dt=self.dt_fast, limit=limit)
        return self

    @property
    def n_steps(self):
        return max(1, int(np.ceil(self.horizon / self.dt_fast - 1e-9)))

    @property
    def dt(self):
        """Rescaled step actually used: the horizon split into whole steps."""
        return self.horizon / self.n_steps

    @property
    def record_steps(self):
        return np.unique(np.r_[np.arange(0, self.n_steps + 1, self.record_stride), self.n_steps])

    def to_json(self):
        return {
            'epsilon': self.epsilon, 'beta': self.beta, 'horizon': self.horizon,
            'dt_fast': self.dt_fast, 'x0': list(self.x0), 'seed': self.seed,
            'record_stride': self.record_stride, 'scheme': self.scheme, 'timescale': self.timescale,
        }


@dataclass(frozen=True, eq=False)
class BatchRecord:
    """Recorded block of trajectories; arrays are indexed (path, record)."""

    config: SimulationConfig
    times: np.ndarray
    states: np.ndarray
    h: np.ndarray
    qv: np.ndarray
    drift: np.ndarray
    martingale: np.ndarray
    exited: np.ndarray
    exit_time: np.ndarray

    def __len__(self):
        return self.states.shape[0]

    def trajectory(self, k):
        return TrajectoryRecord(
            times=self.times,
            states=self.states[k],
            h_series=self.h[k],
            qv_series=self.qv[k],
            drift_series=self.drift[k],
            martingale_series=self.martingale[k],
            epsilon=self.config.epsilon,
            beta=self.config.beta,
            exit_status='box_exit' if self.exited[k] else 'ok',
            exit_time=float(self.exit_time[k]),
        )


@dataclass(frozen=True, eq=False)
class TrajectoryRecord:
    times: np.ndarray
    states: np.ndarray
    h_series: np.ndarray
    qv_series: np.ndarray
    drift_series: np.ndarray
    martingale_series: np.ndarray
    epsilon: float
    beta: float
    exit_status: str = 'ok'
    exit_time: float = float('nan')
    graph_path: object = field(default=None, repr=False)

    def raise_for_status(self):
        if self.exit_status != 'ok':
            raise BoxExit("trajectory left the box", exit_time=self.exit_time)
        return self

    def ito_residual(self):
        """H(X_t) - H(x0) minus the recorded drift and martingale terms, per record point."""
        return self.h_series - self.h_series[0] - self.drift_series - self.martingale_series

    def with_graph_path(self, path):
        return replace(self, graph_path=path)

    def summary(self):
        return {
            'exit_status': self.exit_status,
            'exit_time': None if np.isnan(self.exit_time) else self.exit_time,
            'qv_total': float(self.qv_series[-1]),
            'drift_total': float(self.drift_series[-1]),
            'martingale_total': float(self.martingale_series[-1]),
            'h_start': float(self.h_series[0]),
            'h_end': float(self.h_series[-1]),
            'n_records': int(len(self.times)),
        }


def _drift_step(system, x, scale, step, scheme):
    def f(y):
        return scale * system.perp_grad(y)
    if scheme == 'em':
        return x + step * f(x)
    k1 = f(x)
    k2 = f(x + 0.5 * step * k1)
    k3 = f(x + 0.5 * step * k2)
    k4 = f(x + step * k3)
    return x + step / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def _run(system, config, x0s, gen, h_limit):
    config.validate()
    eps, beta = config.epsilon, config.beta
    n_paths = len(x0s)
    if config.timescale == 'rescaled':
        drift_scale, noise_scale, step = eps ** (beta - 1), eps ** (beta / 2), config.dt
    else:
        drift_scale, noise_scale, step = 1.0, np.sqrt(eps), config.dt * eps ** (beta - 1)
    # eps^beta AH per unit rescaled time equals eps AH per unit original time
    ah_scale = eps ** beta if config.timescale == 'rescaled' else eps
    sqrt_step = np.sqrt(step)

    rec_steps = config.record_steps
    n_rec = len(rec_steps)
    states = np.empty((n_paths, n_rec, 2))
    hs = np.empty((n_paths, n_rec))
    qv = np.zeros((n_paths, n_rec))
    drift = np.zeros((n_paths, n_rec))
    mart = np.zeros((n_paths, n_rec))

    x = np.array(x0s, dtype=float)
    h_cur = system.h(x)
    qv_acc = np.zeros(n_paths)
    drift_acc = np.zeros(n_paths)
    mart_acc = np.zeros(n_paths)
    active = np.ones(n_paths, dtype=bool)
    exit_time = np.full(n_paths, np.nan)
    states[:, 0], hs[:, 0] = x, h_cur
    r = 1

    for k in range(1, config.n_steps + 1):
        z = gen.standard_normal((n_paths, system.l))
        sig = system.sigma(x)
        dw = noise_scale * sqrt_step * np.einsum('pij,pj->pi', sig, z)
        x_new = _drift_step(system, x, drift_scale, step, config.scheme) + dw
        h_new = system.h(x_new)

        out = ~system.contains(x_new)
        if h_limit is not None:
            out |= h_new > h_limit
        leaving = active & out
        if np.any(leaving):
            exit_time[leaving] = k * step
            active &= ~out

        d_drift = ah_scale * system.ah(x) * step
        d_mart = np.einsum('pi,pi->p', system.grad(x), dw)
        qv_acc = np.where(active, qv_acc + (h_new - h_cur) ** 2, qv_acc)
        drift_acc = np.where(active, drift_acc + d_drift, drift_acc)
        mart_acc = np.where(active, mart_acc + d_mart, mart_acc)
        x = np.where(active[:, None], x_new, x)
        h_cur = np.where(active, h_new, h_cur)

        if r < n_rec and k == rec_steps[r]:
            states[:, r], hs[:, r] = x, h_cur
            qv[:, r], drift[:, r], mart[:, r] = qv_acc, drift_acc, mart_acc
            r += 1

    times = rec_steps * step
    return BatchRecord(config, times, states, hs, qv, drift, mart, ~np.isnan(exit_time), exit_time)


def simulate_batch(system, config, n_paths, block=0, h_limit=None):
    """Simulate ``n_paths`` trajectories drawing from the Philox stream keyed by (seed, block)."""
    gen = stream(config.seed, 'sde_sim', 'block', block)
    x0s = np.tile(np.asarray(config.x0, dtype=float), (n_paths, 1))
    batch = _run(system, config, x0s, gen, h_limit)
    n_exit = int(batch.exited.sum())
    if n_exit:
        logger.warning(f"Block {block}: {n_exit}/{n_paths} trajectories left the box")
    return batch


def simulate(system, config, trajectory=0, h_limit=None):
    """One trajectory; box exits are recorded in the record, see ``raise_for_status``."""
    gen = stream(config.seed, 'sde_sim', 'trajectory', trajectory)
    batch = _run(system, config, np.asarray(config.x0, dtype=float)[None, :], gen, h_limit)
    record = batch.trajectory(0)
    if record.exit_status != 'ok':
        logger.warning(f"Trajectory {trajectory} left the box at t={record.exit_time:.6g}")
    return record


def integrate_flow(system, x0, horizon, tol=1e-12, n_out=1001):
    """Orbit of x' = grad^perp H sampled at ``n_out`` evenly spaced times."""
    x0 = np.asarray(x0, dtype=float)
    if not system.contains(x0):
        raise BoxExit("start point lies outside the box", x0=tuple(x0))

    def rhs(t, y):
        return system.perp_grad(y)

    xmin, xmax, ymin, ymax = system.box

    def leave(t, y):
        return min(y[0] - xmin, xmax - y[0], y[1] - ymin, ymax - y[1])
    leave.terminal = True
    leave.direction = -1

    t_eval = np.linspace(0.0, horizon, n_out)
    sol = solve_ivp(rhs, (0.0, horizon), x0, method='DOP853', t_eval=t_eval,
                    rtol=tol, atol=tol * 1e-2, events=leave)
    if sol.status == 1:
        raise BoxExit("flow left the box", exit_time=float(sol.t_events[0][0]))
    states = sol.y.T
    hs = system.h(states)
    zeros = np.zeros(len(sol.t))
    return TrajectoryRecord(
        times=sol.t, states=states, h_series=hs, qv_series=zeros, drift_series=zeros,
        martingale_series=zeros, epsilon=0.0, beta=float('nan'),
    )
