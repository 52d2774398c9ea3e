"""Hamiltonian systems (H, sigma) on the plane, critical points and assumption checks."""

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from ..conf import get_setting
from ..errors import BadKind, ConfigError, DegenerateCritical, NonConvergence
from ..numerics.polynomial import Poly2D
from ..utils.logger import logger

BUILTINS = {
    'harmonic': {
        'terms': [[2, 0, 0.5], [0, 2, 0.5]],
        'box': (-3.0, 3.0, -3.0, 3.0),
    },
    'doublewell': {
        # (x^2 - 1)^2 / 4 + y^2 / 2
        'terms': [[4, 0, 0.25], [2, 0, -0.5], [0, 0, 0.25], [0, 2, 0.5]],
        'box': (-2.5, 2.5, -2.5, 2.5),
    },
    'canonical_saddle': {
        'terms': [[2, 0, 1.0], [0, 2, -1.0]],
        'box': (-1.0, 1.0, -1.0, 1.0),
    },
}


@dataclass(frozen=True, eq=False)
class HamiltonianSystem:
    """H and sigma as polynomials; every method is vectorized over points of shape (..., 2)."""

    name: str
    hamiltonian: Poly2D
    sigma_entries: tuple
    box: tuple
    _hx: Poly2D = field(init=False, repr=False)
    _hy: Poly2D = field(init=False, repr=False)
    _hxx: Poly2D = field(init=False, repr=False)
    _hxy: Poly2D = field(init=False, repr=False)
    _hyy: Poly2D = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.sigma_entries) != 2 or len({len(row) for row in self.sigma_entries}) != 1:
            raise ConfigError("sigma must be a 2 x l matrix", shape=len(self.sigma_entries))
        xmin, xmax, ymin, ymax = self.box
        if not (xmin < xmax and ymin < ymax):
            raise ConfigError("box must be [xmin, xmax, ymin, ymax] with positive extent", box=self.box)
        hx = self.hamiltonian.dx()
        hy = self.hamiltonian.dy()
        object.__setattr__(self, '_hx', hx)
        object.__setattr__(self, '_hy', hy)
        object.__setattr__(self, '_hxx', hx.dx())
        object.__setattr__(self, '_hxy', hx.dy())
        object.__setattr__(self, '_hyy', hy.dy())

    @property
    def l(self):
        return len(self.sigma_entries[0])

    @property
    def sigma_is_constant(self):
        return all(p.degree == 0 for row in self.sigma_entries for p in row)

    def h(self, x):
        x = np.asarray(x, dtype=float)
        return self.hamiltonian(x[..., 0], x[..., 1])

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        return np.stack([self._hx(x[..., 0], x[..., 1]), self._hy(x[..., 0], x[..., 1])], axis=-1)

    def perp_grad(self, x):
        """Hamiltonian vector field (-dH/dy, dH/dx)."""
        g = self.grad(x)
        return np.stack([-g[..., 1], g[..., 0]], axis=-1)

    def hess(self, x):
        x = np.asarray(x, dtype=float)
        px, py = x[..., 0], x[..., 1]
        hxx = self._hxx(px, py) * np.ones_like(px)
        hxy = self._hxy(px, py) * np.ones_like(px)
        hyy = self._hyy(px, py) * np.ones_like(px)
        return np.stack([np.stack([hxx, hxy], axis=-1), np.stack([hxy, hyy], axis=-1)], axis=-2)

    def sigma(self, x):
        x = np.asarray(x, dtype=float)
        px, py = x[..., 0], x[..., 1]
        ones = np.ones_like(px)
        rows = [np.stack([p(px, py) * ones for p in row], axis=-1) for row in self.sigma_entries]
        return np.stack(rows, axis=-2)

    def diffusion(self, x):
        s = self.sigma(x)
        return s @ np.swapaxes(s, -1, -2)

    def ah(self, x):
        """Generator applied to H: 1/2 sum_ij [sigma sigma*]_ij d^2H/dx_i dx_j."""
        return 0.5 * np.einsum('...ij,...ij->...', self.diffusion(x), self.hess(x))

    def g2(self, x):
        """|grad H^* sigma|^2."""
        gs = np.einsum('...i,...ij->...j', self.grad(x), self.sigma(x))
        return np.sum(gs * gs, axis=-1)

    def contains(self, x, pad=0.0):
        x = np.asarray(x, dtype=float)
        xmin, xmax, ymin, ymax = self.box
        return ((x[..., 0] >= xmin - pad) & (x[..., 0] <= xmax + pad)
                & (x[..., 1] >= ymin - pad) & (x[..., 1] <= ymax + pad))

    @property
    def scale(self):
        xmin, xmax, ymin, ymax = self.box
        return float(np.hypot(xmax - xmin, ymax - ymin))

    def boundary_h_min(self, n=4096):
        """Smallest H on the box boundary: the truncation level of the unbounded edge."""
        xmin, xmax, ymin, ymax = self.box
        tx = np.linspace(xmin, xmax, n)
        ty = np.linspace(ymin, ymax, n)
        pts = np.concatenate([
            np.stack([tx, np.full(n, ymin)], axis=-1),
            np.stack([tx, np.full(n, ymax)], axis=-1),
            np.stack([np.full(n, xmin), ty], axis=-1),
            np.stack([np.full(n, xmax), ty], axis=-1),
        ])
        return float(np.min(self.h(pts)))

    def to_config(self):
        return {
            'name': self.name,
            'hamiltonian': {'poly': self.hamiltonian.terms()},
            'sigma': {'poly': [[p.terms() for p in row] for row in self.sigma_entries]},
            'box': list(self.box),
        }


@dataclass(frozen=True)
class FieldSample:
    h: float
    grad: np.ndarray
    hess: np.ndarray
    ah: float
    g2: float


@dataclass(frozen=True)
class CriticalPoint:
    location: tuple
    h_value: float
    kind: str
    hess_eigenvalues: tuple

    @property
    def is_extremum(self):
        return self.kind in ('minimum', 'maximum')


def sigma_from_config(doc):
    if doc is None:
        doc = {'identity': 2}
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ConfigError("sigma must be one of identity/constant/poly", sigma=doc)
    (kind, value), = doc.items()
    if kind == 'identity':
        l = int(value)
        if l < 1:
            raise ConfigError("identity sigma needs l >= 1", l=l)
        mat = np.eye(2, l)
        return tuple(tuple(Poly2D.constant(v) for v in row) for row in mat)
    if kind == 'constant':
        mat = np.asarray(value, dtype=float)
        if mat.ndim != 2 or mat.shape[0] != 2:
            raise ConfigError("constant sigma must be a 2 x l matrix", shape=mat.shape)
        return tuple(tuple(Poly2D.constant(v) for v in row) for row in mat)
    if kind == 'poly':
        if len(value) != 2:
            raise ConfigError("poly sigma must have two rows")
        return tuple(tuple(Poly2D.from_terms(terms) for terms in row) for row in value)
    raise ConfigError(f"unknown sigma kind '{kind}'")


def system_from_config(doc):
    """Build a system from the JSON config document (see the CLI docs for the format)."""
    if not isinstance(doc, dict):
        raise ConfigError("system config must be a JSON object")
    unknown = set(doc) - {'name', 'hamiltonian', 'sigma', 'box'}
    if unknown:
        raise ConfigError("unknown keys in system config", keys=sorted(unknown))
    ham = doc.get('hamiltonian')
    if not isinstance(ham, dict) or len(ham) != 1:
        raise ConfigError("hamiltonian must be {'builtin': name} or {'poly': terms}")
    box = doc.get('box')
    if 'builtin' in ham:
        name = ham['builtin']
        if name not in BUILTINS:
            raise ConfigError(f"unknown builtin Hamiltonian '{name}'", known=sorted(BUILTINS))
        poly = Poly2D.from_terms(BUILTINS[name]['terms'])
        box = box if box is not None else BUILTINS[name]['box']
    elif 'poly' in ham:
        name = doc.get('name', 'poly')
        try:
            poly = Poly2D.from_terms(ham['poly'])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed polynomial terms: {exc}") from exc
        if box is None:
            raise ConfigError("a polynomial Hamiltonian needs an explicit box")
    else:
        raise ConfigError("hamiltonian must be {'builtin': name} or {'poly': terms}")
    if len(box) != 4:
        raise ConfigError("box must have four entries", box=box)
    return HamiltonianSystem(
        name=doc.get('name', name),
        hamiltonian=poly,
        sigma_entries=sigma_from_config(doc.get('sigma')),
        box=tuple(float(b) for b in box),
    )


def builtin_system(name, sigma=None, box=None):
    doc = {'hamiltonian': {'builtin': name}}
    if sigma is not None:
        doc['sigma'] = sigma
    if box is not None:
        doc['box'] = box
    return system_from_config(doc)


def evaluate(system, x):
    x = np.asarray(x, dtype=float)
    return FieldSample(
        h=float(system.h(x)),
        grad=system.grad(x),
        hess=system.hess(x),
        ah=float(system.ah(x)),
        g2=float(system.g2(x)),
    )


def _classify(eigs):
    if eigs[0] > 0 and eigs[1] > 0:
        return 'minimum'
    if eigs[0] < 0 and eigs[1] < 0:
        return 'maximum'
    return 'saddle'


def _newton(system, x, iters=60):
    for _ in range(iters):
        g = system.grad(x)
        step = np.einsum('...ij,...j->...i', np.linalg.pinv(system.hess(x), rcond=1e-10), g)
        x = x - step
        if np.all(np.abs(step) <= 1e-15 * (1.0 + np.abs(x))):
            break
    return x


def find_critical_points(system, box=None, grid_n=None):
    """Newton refinement from cells where both gradient components change sign."""
    box = tuple(box) if box is not None else system.box
    grid_n = int(grid_n or get_setting('critical_grid'))
    if grid_n < 32:
        raise ValueError("grid_n must be at least 32")
    xmin, xmax, ymin, ymax = box
    xs = np.linspace(xmin, xmax, grid_n + 1)
    ys = np.linspace(ymin, ymax, grid_n + 1)
    nodes = np.stack(np.meshgrid(xs, ys, indexing='ij'), axis=-1)
    g = system.grad(nodes)

    def changes_sign(comp):
        corners = np.stack([comp[:-1, :-1], comp[1:, :-1], comp[:-1, 1:], comp[1:, 1:]])
        return (corners.min(axis=0) <= 0) & (corners.max(axis=0) >= 0)

    cells = np.argwhere(changes_sign(g[..., 0]) & changes_sign(g[..., 1]))
    if len(cells) == 0:
        logger.info(f"No critical-point candidates for {system.name} on {box}")
        return []
    seeds = np.stack([
        0.5 * (xs[cells[:, 0]] + xs[cells[:, 0] + 1]),
        0.5 * (ys[cells[:, 1]] + ys[cells[:, 1] + 1]),
    ], axis=-1)

    with np.errstate(all='ignore'):
        roots = _newton(system, seeds)
        grads = np.linalg.norm(system.grad(roots), axis=-1)
        hnorm = np.linalg.norm(system.hess(roots), axis=(-2, -1))
    span = max(xmax - xmin, ymax - ymin)
    ok = (np.all(np.isfinite(roots), axis=-1)
          & system.contains(roots, pad=1e-9 * span)
          & (grads <= 1e-10 * np.maximum(1.0, hnorm)))
    if not np.any(ok):
        raise NonConvergence("Newton failed from every sign-change cell", seeds=len(seeds))

    found = []
    for root in roots[ok][np.lexsort((roots[ok][:, 1], roots[ok][:, 0]))]:
        if all(np.hypot(*(root - other)) > 1e-6 for other in found):
            found.append(root)

    points = []
    for root in found:
        eigs = np.linalg.eigvalsh(system.hess(root))
        if abs(eigs[0] * eigs[1]) < 1e-8:
            raise DegenerateCritical("Hessian is singular at a critical point",
                                     location=tuple(np.round(root, 12)), det=float(eigs[0] * eigs[1]))
        points.append(CriticalPoint(
            location=(float(root[0]), float(root[1])),
            h_value=float(system.h(root)),
            kind=_classify(eigs),
            hess_eigenvalues=(float(eigs[0]), float(eigs[1])),
        ))
    points.sort(key=lambda c: (c.h_value, c.location[0], c.location[1]))
    logger.info(f"Found {len(points)} critical points for {system.name}: "
                + ", ".join(f"{c.kind}@({c.location[0]:.4g},{c.location[1]:.4g})" for c in points))
    return points


@dataclass
class AssumptionCheck:
    name: str
    passed: bool
    details: dict


@dataclass
class AssumptionReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def __getitem__(self, name):
        for check in self.checks:
            if check.name == name:
                return check
        raise KeyError(name)

    def to_json(self):
        return {
            'passed': self.passed,
            'checks': [{'name': c.name, 'passed': c.passed, 'details': c.details} for c in self.checks],
        }


def _box_grid(box, n):
    xmin, xmax, ymin, ymax = box
    xs = np.linspace(xmin, xmax, n)
    ys = np.linspace(ymin, ymax, n)
    return xs, ys, np.stack(np.meshgrid(xs, ys, indexing='ij'), axis=-1)


def separatrix_census(system, critical_points, level, delta, box=None, grid_n=512):
    """Label grid cells whose H-range meets [level - delta, level + delta].

    Marching-squares cells crossed by a level curve are face-adjacent along
    the curve, so each level-set component lies in one labelled component.
    Returns the component label of every critical point within delta of the level.
    """
    box = tuple(box) if box is not None else system.box
    xs, ys, nodes = _box_grid(box, grid_n + 1)
    hv = system.h(nodes)
    corners = np.stack([hv[:-1, :-1], hv[1:, :-1], hv[:-1, 1:], hv[1:, 1:]])
    band = (corners.min(axis=0) <= level + delta) & (corners.max(axis=0) >= level - delta)
    labels, _ = ndimage.label(band)
    owners = {}
    for idx, cp in enumerate(critical_points):
        if abs(cp.h_value - level) > delta:
            continue
        i = int(np.clip(np.searchsorted(xs, cp.location[0]) - 1, 0, grid_n - 1))
        j = int(np.clip(np.searchsorted(ys, cp.location[1]) - 1, 0, grid_n - 1))
        owners[idx] = int(labels[i, j])
    return owners


def check_assumptions(system, box=None, ring_radius=10.0, critical_points=None,
                      n_ring=720, grid_n=256, delta=1e-3, hessian_bound=None):
    """Advisory report on the standing assumptions; failures are reported, never raised."""
    box = tuple(box) if box is not None else system.box
    checks = []

    _, _, nodes = _box_grid(box, grid_n)
    hessian_bound = float(hessian_bound or get_setting('hessian_bound'))
    hnorm = np.linalg.norm(system.hess(nodes), axis=(-2, -1))
    worst = float(hnorm.max()) if np.all(np.isfinite(hnorm)) else float('inf')
    checks.append(AssumptionCheck('bounded_second_derivatives', worst <= hessian_bound, {
        'max_hessian_norm_on_box': worst,
        'hessian_bound': hessian_bound,
        'globally_bounded': system.hamiltonian.degree <= 2,
    }))

    theta = np.linspace(0.0, 2 * np.pi, n_ring, endpoint=False)
    ring = ring_radius * np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    hess_ring = system.hess(ring)
    a1 = float(np.min(system.h(ring) / ring_radius ** 2))
    a2 = float(np.min(np.linalg.norm(system.grad(ring), axis=-1) / ring_radius))
    a3 = float(np.min(hess_ring[..., 0, 0] + hess_ring[..., 1, 1]))
    checks.append(AssumptionCheck('growth', a1 > 0 and a2 > 0 and a3 > 0, {
        'ring_radius': ring_radius, 'A1': a1, 'A2': a2, 'A3': a3,
    }))

    degenerate = None
    if critical_points is None:
        try:
            critical_points = find_critical_points(system, box)
        except (DegenerateCritical, NonConvergence) as exc:
            degenerate = str(exc)
            critical_points = []
    checks.append(AssumptionCheck('nondegenerate_critical_points', degenerate is None, {
        'count': len(critical_points), 'error': degenerate,
    }))

    shared = []
    for cp in critical_points:
        if cp.kind != 'saddle':
            continue
        owners = separatrix_census(system, critical_points, cp.h_value, delta, box=box, grid_n=2 * grid_n)
        mine = owners.get(critical_points.index(cp))
        others = [idx for idx, lab in owners.items() if lab == mine and critical_points[idx] is not cp]
        if others:
            shared.append({'saddle': list(cp.location), 'h': cp.h_value,
                           'shared_with': [list(critical_points[i].location) for i in others]})
    checks.append(AssumptionCheck('separatrix_uniqueness', not shared, {'violations': shared}))

    eig = np.linalg.eigvalsh(system.diffusion(nodes))
    lam_min, lam_max = float(eig[..., 0].min()), float(eig[..., -1].max())
    checks.append(AssumptionCheck('diffusion_spectrum', lam_min > 0 and np.isfinite(lam_max), {
        'lambda_min': lam_min, 'lambda_max': lam_max,
    }))

    report = AssumptionReport(checks)
    for check in checks:
        if not check.passed:
            logger.warning(f"Assumption '{check.name}' fails for {system.name}: {check.details}")
    return report


def _punctured_ball(center, radius, n_samples):
    n_r = max(2, int(np.sqrt(n_samples)))
    n_t = max(4, n_samples // n_r)
    radii = radius * np.arange(1, n_r + 1) / n_r
    theta = np.linspace(0.0, 2 * np.pi, n_t, endpoint=False)
    r, t = np.meshgrid(radii, theta, indexing='ij')
    return np.asarray(center) + np.stack([r * np.cos(t), r * np.sin(t)], axis=-1).reshape(-1, 2)


def positive_drift_margin(system, minimum, radius, n_samples=10_000):
    """min over the punctured ball of 4 H AH - |grad H^* sigma|^2, H measured from the minimum."""
    if minimum.kind != 'minimum':
        raise BadKind("positive drift margin applies to minima only", kind=minimum.kind)
    pts = _punctured_ball(minimum.location, radius, n_samples)
    rel = system.h(pts) - minimum.h_value
    return float(np.min(4.0 * rel * system.ah(pts) - system.g2(pts)))


def sqrt_drift_margin(system, minimum, radius, n_samples=10_000):
    """min over the punctured ball of the drift of sqrt(H): AH/(2 sqrt H) - g2/(8 H^{3/2})."""
    if minimum.kind != 'minimum':
        raise BadKind("sqrt drift margin applies to minima only", kind=minimum.kind)
    pts = _punctured_ball(minimum.location, radius, n_samples)
    rel = system.h(pts) - minimum.h_value
    drift = system.ah(pts) / (2 * np.sqrt(rel)) - system.g2(pts) / (8 * rel ** 1.5)
    return float(np.min(drift))
