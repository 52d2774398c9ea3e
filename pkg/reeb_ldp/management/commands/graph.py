from ...analysis.reeb_graph import export_json
from ..base import ReebCommand


class Command(ReebCommand):
    help = 'Build the Reeb graph: manage.py graph --config doublewell.json export'
    output_schema = {
        'h_max': 'float',
        'vertices': [{'id': 'int', 'x': 'float', 'y': 'float', 'h': 'float', 'kind': 'interior|exterior'}],
        'edges': [{'id': 'int', 'h_lo': 'float', 'h_hi': 'float|null', 'v_lo': 'int', 'v_hi': 'int|null'}],
    }

    def add_command_arguments(self, parser):
        parser.add_argument('action', nargs='?', default='export', choices=['export'])
        parser.add_argument('--grid', type=int, default=None, help="census grid per axis")

    def run(self, system, **options):
        graph = self.graph_for(system)
        self.emit_json(export_json(graph))
