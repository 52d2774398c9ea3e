import numpy as np

from ...analysis.action_functional import evaluate_action, first_integral, minimize_action
from ...analysis.reeb_graph import GraphPath, GraphPoint
from ...errors import ConfigError
from ...utils.output import read_csv
from ..base import ReebCommand


def parse_point(graph, text):
    """``edge:h`` as a graph point, flagged at a vertex when h is an endpoint value."""
    try:
        edge, h = text.split(':')
        edge, h = int(edge), float(h)
    except ValueError:
        raise ConfigError("graph points are written edge:h", value=text) from None
    if not 0 <= edge < len(graph.edges):
        raise ConfigError("no such edge", edge=edge)
    at = [v for v in graph.vertices_at(h) if v in graph.edges[edge].endpoints]
    return GraphPoint(edge, h, at[0] if at else None)


def read_path(graph, path):
    rows = read_csv(path)
    try:
        times = [float(r['t']) for r in rows]
        points = [parse_point(graph, f"{r['edge_id']}:{r['h']}") for r in rows]
    except KeyError as exc:
        raise ConfigError("path CSV needs the columns t,edge_id,h", missing=str(exc)) from None
    return GraphPath.from_points(graph, times, points)


class Command(ReebCommand):
    help = ('Evaluate or minimize the action: manage.py action eval --path phi.csv, '
            'manage.py action minimize --from 0:1 --to 0:2 --horizon 1')
    output_schema = {'action': 'float|null', 'E': 'float|null', 'path_csv': 'str|null',
                     'flags': ['str'], 'diagnostics': 'object (minimize)'}

    def add_command_arguments(self, parser):
        parser.add_argument('mode', choices=['eval', 'minimize'])
        parser.add_argument('--path', help="path CSV with columns t,edge_id,h (eval)")
        parser.add_argument('--from', dest='y_from', help="start point edge:h (minimize)")
        parser.add_argument('--to', dest='y_to', help="end point edge:h (minimize)")
        parser.add_argument('--horizon', type=float, help="time horizon T (minimize)")
        parser.add_argument('--n-time', type=int, default=400)
        parser.add_argument('--n-h', type=int, default=400)
        parser.add_argument('--path-out', default=None, help="minimizer CSV (default: beside --out)")
        parser.add_argument('--grid', type=int, default=None, help="census grid per axis")
        parser.add_argument('--n-interior', type=int, default=None)

    def run(self, system, **options):
        graph = self.graph_for(system)
        if options['mode'] == 'eval':
            self._eval(system, graph, options)
        else:
            self._minimize(system, graph, options)

    def _eval(self, system, graph, options):
        if not options['path']:
            raise ConfigError("action eval needs --path")
        path = read_path(graph, options['path'])
        tables = self.tables_for(system, graph, np.unique(path.edge_ids))
        value = evaluate_action(tables, path)
        lagr = first_integral(tables, path)
        lagr = lagr[np.isfinite(lagr)]
        self.emit_json({
            'action': value.value if value.finite else None,
            'E': float(np.mean(lagr)) if len(lagr) else None,
            'path_csv': options['path'],
            **value.to_json(),
        })

    def _minimize(self, system, graph, options):
        if not (options['y_from'] and options['y_to'] and options['horizon']):
            raise ConfigError("action minimize needs --from, --to and --horizon")
        y0, y1 = parse_point(graph, options['y_from']), parse_point(graph, options['y_to'])
        edges = [leg[0] for leg in graph.route(y0, y1)]
        tables = self.tables_for(system, graph, edges)
        result = minimize_action(tables, graph, y0, y1, options['horizon'],
                                 n_time=options['n_time'], n_h=options['n_h'])
        csv_path = options['path_out'] or self.sibling_path('.path.csv')
        if csv_path is not None:
            p = result.path
            self.emit_csv(['t', 'edge_id', 'h'], zip(p.times, p.edge_ids, p.h), csv_path)
        self.emit_json({**result.to_json(), 'path_csv': csv_path})
