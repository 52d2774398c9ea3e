from ...errors import ConfigError
from ..base import ReebCommand


class Command(ReebCommand):
    help = 'Tabulate T(h) and B^2(h): manage.py coeffs --config harmonic.json --edge 0'
    output_schema = {'csv_columns': ['edge_id', 'h', 'T', 'B2']}

    def add_command_arguments(self, parser):
        parser.add_argument('--edge', type=int, action='append', help="edge id (repeatable; default all)")
        parser.add_argument('--n-interior', type=int, default=None, help="interior levels per edge")
        parser.add_argument('--grid', type=int, default=None, help="census grid per axis")

    def run(self, system, **options):
        graph = self.graph_for(system)
        edges = options['edge'] if options['edge'] is not None else range(len(graph.edges))
        for e in edges:
            if not 0 <= e < len(graph.edges):
                raise ConfigError("no such edge", edge=e, n_edges=len(graph.edges))
        tables = self.tables_for(system, graph, edges)
        rows = [row for e in sorted(tables) for row in tables[e].to_rows()]
        self.emit_csv(['edge_id', 'h', 'T', 'B2'], rows)
