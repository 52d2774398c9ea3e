"""Morse normal-form chart around a saddle and deterministic transit times through it.

The chart psi maps the rectangle U0 = [-4l, 4l] x [-2l, 2l] onto a
neighbourhood of the saddle with H(psi(mu, nu)) = H(saddle) + mu^2 - nu^2.
It starts from the quadratic normal form in the Hessian eigenframe and
corrects each point along grad H with a scalar Newton solve, so the identity
holds pointwise up to the Newton tolerance.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp

from ..conf import get_setting
from ..errors import BadKind, ChartFail, OutsideChart
from ..utils.logger import logger
from ..utils.rng import stream


def _frame(system, saddle):
    eigvals, eigvecs = np.linalg.eigh(system.hess(np.asarray(saddle.location)))
    lam_minus, lam_plus = eigvals
    e_minus, e_plus = eigvecs[:, 0], eigvecs[:, 1]
    # fix the eigenvector signs so the frame does not depend on LAPACK
    e_plus = e_plus * np.sign(e_plus[np.argmax(np.abs(e_plus))])
    e_minus = e_minus * np.sign(e_minus[np.argmax(np.abs(e_minus))])
    flipped = np.linalg.det(np.column_stack([e_plus, e_minus])) < 0
    if flipped:
        e_minus = -e_minus
    frame = np.column_stack([e_plus * np.sqrt(2 / lam_plus), e_minus * np.sqrt(2 / -lam_minus)])
    return frame, bool(flipped)


@dataclass(frozen=True, eq=False)
class SaddleChart:
    system: object
    saddle: object
    l: float
    frame: np.ndarray
    orientation_flipped: bool
    residual: float = float('nan')
    m_bar: float = float('nan')

    @property
    def origin(self):
        return np.asarray(self.saddle.location, dtype=float)

    def normal_form(self, w):
        w = np.asarray(w, dtype=float)
        return w[..., 0] ** 2 - w[..., 1] ** 2

    def psi(self, w, iters=40):
        w = np.asarray(w, dtype=float)
        base = self.origin + w @ self.frame.T
        target = self.saddle.h_value + self.normal_form(w)
        g0 = self.system.grad(base)
        norm2 = np.sum(g0 * g0, axis=-1)
        direction = np.where((norm2 > 1e-300)[..., None], g0 / np.maximum(norm2, 1e-300)[..., None], 0.0)
        c = np.zeros(base.shape[:-1])
        for _ in range(iters):
            x = base + c[..., None] * direction
            r = self.system.h(x) - target
            slope = np.sum(self.system.grad(x) * direction, axis=-1)
            delta = np.where(np.abs(slope) > 1e-300, r / np.where(slope == 0, 1.0, slope), 0.0)
            c = c - delta
            if np.all(np.abs(delta) <= 1e-16 * (1 + np.abs(c))):
                break
        return base + c[..., None] * direction

    __call__ = psi

    def jacobian(self, w, step=1e-6):
        w = np.asarray(w, dtype=float)
        cols = []
        for axis in (0, 1):
            e = np.zeros(2)
            e[axis] = step
            cols.append((self.psi(w + e) - self.psi(w - e)) / (2 * step))
        return np.stack(cols, axis=-1)

    def det_j(self, w):
        return np.linalg.det(self.jacobian(w))

    def inverse(self, x, iters=50):
        x = np.asarray(x, dtype=float)
        w = np.linalg.solve(self.frame, x - self.origin)
        for _ in range(iters):
            r = self.psi(w) - x
            step = np.linalg.solve(self.jacobian(w), r)
            w = w - step
            if np.hypot(*step) <= 1e-14 * (1 + np.hypot(*w)):
                break
        return w

    def grid(self, n):
        mu = np.linspace(-4 * self.l, 4 * self.l, n)
        nu = np.linspace(-2 * self.l, 2 * self.l, n)
        return mu, nu, np.stack(np.meshgrid(mu, nu, indexing='ij'), axis=-1)

    def in_transit_domain(self, mu, nu):
        g = mu * mu - nu * nu
        return 0 < mu <= 2 * self.l and abs(nu) <= self.l and 0 < g < 3 * self.l ** 2


def _validated(chart, tol, n):
    mu, nu, w = chart.grid(n)
    with np.errstate(all='ignore'):
        pts = chart.psi(w)
        residual = np.abs(chart.system.h(pts) - chart.saddle.h_value - chart.normal_form(w))
        jac = chart.jacobian(w)
    worst = float(np.max(residual)) if np.all(np.isfinite(residual)) else float('inf')
    if worst > tol:
        raise ChartFail("normal-form residual above tolerance", l=chart.l, residual=worst, tol=tol)
    det = np.linalg.det(jac)
    if not np.all(det > 0):
        raise ChartFail("chart Jacobian changes sign", l=chart.l, det_min=float(np.min(det)))
    ddet = np.gradient(det, mu, nu)
    norms = [
        np.max(np.linalg.norm(pts - chart.origin, axis=-1)),
        np.max(np.linalg.norm(w, axis=-1)),
        np.max(np.linalg.norm(jac, 2, axis=(-2, -1))),
        np.max(np.linalg.norm(np.linalg.inv(jac), 2, axis=(-2, -1))),
        np.max(np.abs(det)),
        np.max(np.hypot(ddet[0], ddet[1])),
    ]
    return SaddleChart(chart.system, chart.saddle, chart.l, chart.frame, chart.orientation_flipped,
                       residual=worst, m_bar=float(max(1.0, *norms)))


def build_saddle_chart(system, saddle, l=0.25, tol=None, grid_n=None, retries=3):
    """Chart on U0 of half-width 4l x 2l; ``l`` is halved up to ``retries`` times on failure."""
    if saddle.kind != 'saddle':
        raise BadKind("saddle chart needs a saddle", kind=saddle.kind)
    if not 0 < l < 1:
        raise ValueError("chart size l must lie in (0, 1)")
    tol = float(tol or get_setting('chart_tol'))
    grid_n = int(grid_n or get_setting('chart_grid'))
    frame, flipped = _frame(system, saddle)
    failure = None
    for attempt in range(retries + 1):
        try:
            chart = _validated(SaddleChart(system, saddle, l, frame, flipped), tol, grid_n)
            if flipped:
                logger.info(f"Saddle chart at {saddle.location}: eigenframe reflected to make det J > 0")
            return chart
        except ChartFail as exc:
            failure = exc
            logger.warning(f"Saddle chart attempt {attempt + 1} failed at l={l:.4g}: {exc}")
            l *= 0.5
    raise failure


def transit_time(chart, mu, nu):
    """Time for the flow to carry psi(mu, nu) to the upper side nu = l of U.

    T = 1/2 int_nu^l det J(sqrt(G + y^2), y) / sqrt(G + y^2) dy with
    G = mu^2 - nu^2; the substitution y = sqrt(G) sinh u removes the
    near-singular denominator.
    """
    if not chart.in_transit_domain(mu, nu):
        raise OutsideChart("point outside the transit domain", mu=mu, nu=nu, l=chart.l)
    root = np.sqrt(mu * mu - nu * nu)
    u0, u1 = np.arcsinh(nu / root), np.arcsinh(chart.l / root)

    def integrand(u):
        return float(chart.det_j(np.array([root * np.cosh(u), root * np.sinh(u)])))

    value, _ = quad(integrand, u0, u1, epsabs=1e-11, epsrel=1e-9, limit=200)
    return 0.5 * value


def exit_time_ode(chart, mu, nu, t_max=1e3):
    """Exit time through nu = l by integrating x' = grad^perp H from psi(mu, nu)."""
    if not chart.in_transit_domain(mu, nu):
        raise OutsideChart("point outside the transit domain", mu=mu, nu=nu, l=chart.l)
    system = chart.system

    def rhs(t, y):
        return system.perp_grad(y)

    def upper(t, y):
        return chart.inverse(y)[1] - chart.l
    upper.terminal = True
    upper.direction = 1

    sol = solve_ivp(rhs, (0.0, t_max), chart.psi(np.array([mu, nu])), method='DOP853',
                    rtol=1e-12, atol=1e-14, events=upper)
    if not len(sol.t_events[0]):
        raise OutsideChart("flow did not reach the upper side of U", mu=mu, nu=nu)
    return float(sol.t_events[0][0])


def sample_transit_points(chart, n, seed=0, label='transit'):
    """Uniform points of {0 < mu <= 2l, |nu| <= l, 0 < mu^2 - nu^2 < 3 l^2}."""
    gen = stream(seed, 'saddle_chart', label)
    out = []
    while len(out) < n:
        mu = gen.uniform(0.0, 2 * chart.l)
        nu = gen.uniform(-chart.l, chart.l)
        if chart.in_transit_domain(mu, nu):
            out.append((mu, nu))
    return np.array(out)


@dataclass
class LogBoundReport:
    n_samples: int
    violations: int
    max_ratio: float
    m_bar: float

    @property
    def passed(self):
        return self.violations == 0


def log_bound_check(chart, n_samples=100, seed=0):
    """T(mu, nu) <= M [log(l + sqrt(l^2 + G)) - log(G)/2] at random transit points."""
    samples = sample_transit_points(chart, n_samples, seed, 'log_bound')
    ratios = []
    for mu, nu in samples:
        g = mu * mu - nu * nu
        bound = chart.m_bar * (np.log(chart.l + np.sqrt(chart.l ** 2 + g)) - 0.5 * np.log(g))
        ratios.append(transit_time(chart, mu, nu) / bound)
    ratios = np.array(ratios)
    report = LogBoundReport(n_samples, int(np.sum(ratios > 1.0)), float(ratios.max()), chart.m_bar)
    if not report.passed:
        logger.warning(f"Transit log bound violated at {report.violations}/{n_samples} points")
    return report


@dataclass
class DerivativeReport:
    samples: np.ndarray
    dt_dmu: np.ndarray
    dt_dnu: np.ndarray
    g_values: np.ndarray

    @property
    def c_min(self):
        """Smallest C with |dT| <= C / G at every sample."""
        return float(np.max(np.maximum(np.abs(self.dt_dmu), np.abs(self.dt_dnu)) * self.g_values))

    @property
    def passed(self):
        return bool(np.all(np.isfinite(self.dt_dmu)) and np.all(np.isfinite(self.dt_dnu)))


def transit_derivative_bounds(chart, samples, step=None):
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    step = step or 1e-5 * chart.l
    d_mu, d_nu, gs = [], [], []
    for mu, nu in samples:
        d_mu.append((transit_time(chart, mu + step, nu) - transit_time(chart, mu - step, nu)) / (2 * step))
        d_nu.append((transit_time(chart, mu, nu + step) - transit_time(chart, mu, nu - step)) / (2 * step))
        gs.append(mu * mu - nu * nu)
    return DerivativeReport(samples, np.array(d_mu), np.array(d_nu), np.array(gs))
