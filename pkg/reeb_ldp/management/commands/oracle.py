import numpy as np

from ...analysis.averaged_coeffs import rotation_time_limit
from ...analysis.hamiltonian_field import find_critical_points, positive_drift_margin, sqrt_drift_margin
from ...errors import ConfigError
from ...simulation.brownian import CASES, OracleParams, brownian_saddle_oracle
from ...simulation.ldp_verify import escape_extremum_probe
from ...simulation.saddle_chart import (
    build_saddle_chart,
    exit_time_ode,
    log_bound_check,
    sample_transit_points,
    transit_derivative_bounds,
    transit_time,
)
from ...simulation.sde_sim import SimulationConfig, resolve_dt
from ...utils.config import parse_floats
from ..base import ReebCommand


class Command(ReebCommand):
    help = ('Escape and transit oracles: manage.py oracle brownian --case i, oracle escape --config harmonic.json, '
            'oracle drift --config doublewell.json, oracle transit --config doublewell.json')
    output_schema = {
        'brownian': {'reports': [{'case': 'str', 'probability': 'float', 'std_error': 'float',
                                  'exact': 'float|null', 'bound': 'float|null', 'vacuous': 'bool',
                                  'passed': 'bool'}]},
        'escape': {'k_grid': ['float'], 'probabilities': ['float'], 'smallest_k': 'float|null',
                   'monotone': 'bool'},
        'drift': {'minima': [{'x': 'float', 'y': 'float', 'margin': 'float', 'sqrt_margin': 'float',
                              'passed': 'bool'}]},
        'transit': {'saddles': [{'x': 'float', 'y': 'float', 'l': 'float', 'log_bound_violations': 'int',
                                 'max_ode_rel_diff': 'float', 'derivative_c_min': 'float'}]},
    }

    def add_command_arguments(self, parser):
        parser.add_argument('kind', choices=['brownian', 'escape', 'drift', 'transit'])
        parser.add_argument('--case', choices=CASES + ('all',), default='all', help="brownian case")
        parser.add_argument('--epsilon', type=float, default=0.05)
        parser.add_argument('--beta', type=float, default=0.5)
        parser.add_argument('--horizon', type=float, default=1.0)
        parser.add_argument('--a', type=float, default=0.4)
        parser.add_argument('--d', type=float, default=None, help="default 0.1 for (i), 0.2 for (ii) and (iii)")
        parser.add_argument('--kappa', type=float, default=0.05)
        parser.add_argument('--amplitude', type=float, default=1.5, help="A in case (iii)")
        parser.add_argument('--level', type=float, default=1.0, help="b in the reflection check")
        parser.add_argument('--paths', type=int, default=100_000)
        parser.add_argument('--steps', type=int, default=None, help="Euler grid instead of exact bridge sampling")
        parser.add_argument('--k-grid', default='0.01,0.03,0.1,0.3,1,3,10,100,1000')
        parser.add_argument('--vertex', type=int, default=None, help="exterior vertex id (escape)")
        parser.add_argument('--dt', type=float, default=None)
        parser.add_argument('--radius', type=float, default=0.5, help="punctured ball radius (drift)")
        parser.add_argument('--l', type=float, default=0.25, help="chart size (transit)")
        parser.add_argument('--samples', type=int, default=100, help="chart sample points (transit)")
        parser.add_argument('--grid', type=int, default=None, help="census grid per axis")

    @property
    def needs_system(self):
        return self.options.get('kind') != 'brownian'

    def handle(self, *args, **options):
        self.options = options
        return super().handle(*args, **options)

    def run(self, system, **options):
        doc = getattr(self, f"_{options['kind']}")(system, options)
        self.emit_json({'kind': options['kind'], **doc})

    def _brownian(self, system, options):
        cases = [c for c in CASES] if options['case'] == 'all' else [options['case']]
        reports = []
        for case in cases:
            d = options['d'] if options['d'] is not None else (0.1 if case == 'i' else 0.2)
            params = OracleParams(case, options['epsilon'], options['beta'], options['horizon'], options['a'], d,
                                  options['kappa'], options['amplitude'], options['level'])
            reports.append(brownian_saddle_oracle(params, n_paths=options['paths'], seed=options['seed'],
                                                  n_steps=options['steps'], pmap=self.pmap).to_json())
        return {'reports': reports}

    def _escape(self, system, options):
        graph = self.graph_for(system)
        exterior = [v for v in graph.vertices if v.kind == 'exterior']
        if options['vertex'] is not None:
            exterior = [v for v in exterior if v.id == options['vertex']]
            if not exterior:
                raise ConfigError("not an exterior vertex", vertex=options['vertex'])
        vertex = exterior[0]
        dt = resolve_dt(options['epsilon'], options['beta'], rotation_time_limit(system, vertex.critical),
                        options['dt'])
        config = SimulationConfig(options['epsilon'], options['beta'], options['horizon'], dt,
                                  tuple(vertex.location), seed=options['seed'])
        report = escape_extremum_probe(system, graph, config, parse_floats(options['k_grid'], 'k-grid'),
                                       n_paths=options['paths'], pmap=self.pmap)
        return {'vertex': vertex.id, **report.to_json()}

    def _drift(self, system, options):
        minima = [p for p in find_critical_points(system) if p.kind == 'minimum']
        out = []
        for p in minima:
            margin = positive_drift_margin(system, p, options['radius'])
            out.append({'x': p.location[0], 'y': p.location[1], 'h': p.h_value, 'margin': margin,
                        'sqrt_margin': sqrt_drift_margin(system, p, options['radius']), 'passed': margin > 0})
        return {'radius': options['radius'], 'minima': out}

    def _transit(self, system, options):
        saddles = [p for p in find_critical_points(system) if p.kind == 'saddle']
        out = []
        for p in saddles:
            chart = build_saddle_chart(system, p, l=options['l'])
            bound = log_bound_check(chart, n_samples=options['samples'], seed=options['seed'])
            pts = sample_transit_points(chart, min(options['samples'], 20), seed=options['seed'], label='ode')
            rel = []
            for mu, nu in pts:
                ode = exit_time_ode(chart, mu, nu)
                rel.append(abs(transit_time(chart, mu, nu) - ode) / ode)
            deriv = transit_derivative_bounds(chart, pts[:5])
            out.append({
                'x': p.location[0], 'y': p.location[1], 'h': p.h_value, 'l': chart.l,
                'orientation_flipped': chart.orientation_flipped, 'residual': chart.residual,
                'm_bar': chart.m_bar, 'log_bound_violations': bound.violations,
                'log_bound_max_ratio': bound.max_ratio,
                'max_ode_rel_diff': float(np.max(rel)) if rel else None,
                'derivative_c_min': deriv.c_min,
            })
        return {'saddles': out}
