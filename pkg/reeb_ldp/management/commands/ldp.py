import numpy as np

from ...analysis.averaged_coeffs import edge_seed
from ...simulation.ldp_verify import TubeExperiment, estimate_tube, recheck_hits
from ...utils.config import parse_floats
from ..base import ReebCommand
from .action import read_path


class Command(ReebCommand):
    help = ('Verify the LDP rate on a tube: manage.py ldp verify --path phi.csv --delta 0.3 '
            '--epsilons 0.16,0.09,0.04 --beta 0.5 --samples 100000')
    output_schema = {
        'per_epsilon': [{'epsilon': 'float', 'samples': 'int', 'hits': 'int', 'p_hat': 'float',
                         'ci_low': 'float', 'ci_high': 'float', 'box_exits': 'int', 'dt': 'float',
                         'all_missed': 'bool'}],
        's_fit': 'float|null', 's_reference': 'float', 'verdict': 'agree|disagree|no_fit',
        'fit': 'object', 'monotone': 'bool', 'experiment': 'object', 'recheck': 'object|null',
    }

    def add_command_arguments(self, parser):
        parser.add_argument('action', choices=['verify'])
        parser.add_argument('--path', required=True, help="reference path CSV with columns t,edge_id,h")
        parser.add_argument('--delta', type=float, required=True, help="tube radius")
        parser.add_argument('--epsilons', required=True, help="strictly decreasing ladder, e.g. 0.16,0.09,0.04")
        parser.add_argument('--beta', type=float, required=True)
        parser.add_argument('--samples', required=True, help="samples per epsilon, one value or one per epsilon")
        parser.add_argument('--x0', default=None, help="plane start point x,y (default: a point of phi(0))")
        parser.add_argument('--dt', type=float, default=None, help="rescaled step cap")
        parser.add_argument('--recheck', type=float, default=0.0,
                            help="fraction of trajectories recounted on the slow path at the smallest epsilon")
        parser.add_argument('--grid', type=int, default=None, help="census grid per axis")
        parser.add_argument('--n-interior', type=int, default=None)

    def run(self, system, **options):
        graph = self.graph_for(system)
        reference = read_path(graph, options['path'])
        start = reference.point(0)
        if options['x0']:
            x0 = parse_floats(options['x0'], 'x0')
        elif start.at_vertex is not None:
            x0 = tuple(graph.vertices[start.at_vertex].location)
        else:
            x0 = tuple(float(c) for c in edge_seed(system, graph, start.edge_id, start.h))
        samples = [int(s) for s in parse_floats(options['samples'], 'samples')]
        exp = TubeExperiment(
            reference=reference, delta=options['delta'], epsilons=parse_floats(options['epsilons'], 'epsilons'),
            beta=options['beta'], samples=samples[0] if len(samples) == 1 else tuple(samples), x0=x0,
            seed=options['seed'], dt_fast=options['dt'],
        ).validate()
        edges = set(np.unique(reference.edge_ids).tolist())
        for leg in graph.route(reference.point(0), reference.point(len(reference) - 1)):
            edges.add(leg[0])
        tables = self.tables_for(system, graph, edges)
        estimate = estimate_tube(system, graph, tables, exp, pmap=self.pmap)
        doc = {**estimate.to_json(), 'experiment': exp.to_json(), 'recheck': None}
        if options['recheck'] > 0:
            check = recheck_hits(system, graph, exp, len(exp.epsilons) - 1, fraction=options['recheck'],
                                 tables=tables)
            doc['recheck'] = {'epsilon': check.epsilon, 'checked': check.checked,
                              'mismatches': check.mismatches, 'passed': check.passed}
        self.emit_json(doc)
