import numpy as np

from ...analysis.averaged_coeffs import rotation_time_limit
from ...analysis.reeb_graph import project, project_batch
from ...simulation.ldp_verify import quadratic_variation_batch
from ...simulation.sde_sim import SCHEMES, TIMESCALES, SimulationConfig, resolve_dt, simulate, simulate_batch
from ...utils.config import parse_floats
from ...utils.logger import logger
from ...utils.output import to_json_text
from ..base import ReebCommand


class Command(ReebCommand):
    help = ('Simulate the rescaled diffusion: manage.py simulate --config harmonic.json '
            '--epsilon 0.1 --beta 0.5 --horizon 1 --x0 1,0')
    output_schema = {
        'csv_columns': ['t', 'x', 'y', 'h', 'edge_id'],
        'summary': {'exit_status': 'ok|box_exit', 'exit_time': 'float|null', 'qv_total': 'float',
                    'drift_total': 'float', 'martingale_total': 'float', 'h_start': 'float',
                    'h_end': 'float', 'n_records': 'int', 'config': 'object',
                    'dt_requested': 'float|null', 't_min': 'float',
                    'averaging': 'object (with --paths > 1)'},
    }

    def add_command_arguments(self, parser):
        parser.add_argument('--epsilon', type=float, required=True)
        parser.add_argument('--beta', type=float, required=True)
        parser.add_argument('--horizon', type=float, required=True, help="rescaled time horizon T")
        parser.add_argument('--x0', required=True, help="start point x,y")
        parser.add_argument('--dt', type=float, default=None,
                            help="rescaled time step, clamped to dt_factor * eps^(1-beta) * T_min")
        parser.add_argument('--record-stride', type=int, default=1)
        parser.add_argument('--scheme', choices=SCHEMES, default='rk4-em')
        parser.add_argument('--timescale', choices=TIMESCALES, default='rescaled')
        parser.add_argument('--trajectory', type=int, default=0, help="trajectory index in the seed's stream")
        parser.add_argument('--paths', type=int, default=1,
                            help="with more than one path, also report the quadratic-variation ratio")
        parser.add_argument('--grid', type=int, default=None, help="census grid per axis")
        parser.add_argument('--n-interior', type=int, default=None)
        parser.add_argument('--summary', default=None, help="summary JSON path (default: beside --out)")

    def min_rotation_time(self, system, graph, x0):
        """Shortest rotation time over the extrema and the edge holding x0."""
        limits = [rotation_time_limit(system, v.critical) for v in graph.vertices if v.kind == 'exterior']
        start = project(system, graph, x0)
        table = self.tables_for(system, graph, [start.edge_id])[start.edge_id]
        return float(min(limits + [float(np.min(table.t_values))]))

    def run(self, system, **options):
        x0 = parse_floats(options['x0'], 'x0')
        graph = self.graph_for(system)
        t_min = self.min_rotation_time(system, graph, x0)
        dt = resolve_dt(options['epsilon'], options['beta'], t_min, options['dt'])
        if options['dt'] is not None and dt < options['dt']:
            logger.warning(f"Requested dt={options['dt']:.4g} exceeds the step policy; using {dt:.4g}")
        config = SimulationConfig(
            epsilon=options['epsilon'], beta=options['beta'], horizon=options['horizon'],
            dt_fast=dt, x0=x0, seed=options['seed'], record_stride=options['record_stride'],
            scheme=options['scheme'], timescale=options['timescale'],
        ).validate()
        record = simulate(system, config, trajectory=options['trajectory'])
        edges, _, _ = project_batch(system, graph, record.states[None])
        rows = [(t, x, y, h, e) for t, (x, y), h, e in zip(record.times, record.states, record.h_series, edges[0])]
        self.emit_csv(['t', 'x', 'y', 'h', 'edge_id'], rows)

        summary = {**record.summary(), 'config': config.to_json(), 'dt_requested': options['dt'], 't_min': t_min}
        if options['paths'] > 1:
            batch = simulate_batch(system, config, options['paths'])
            visited = np.unique(project_batch(system, graph, batch.states[~batch.exited])[0])
            tables = self.tables_for(system, graph, visited)
            summary['averaging'] = quadratic_variation_batch(batch, tables, system, graph).to_json()
        path = options['summary'] or self.sibling_path('.summary.json')
        if path is None:
            # stdout carries the CSV
            self.stderr.write(to_json_text(summary, self.digest))
        else:
            self.emit_json(summary, path)
