from ...analysis.hamiltonian_field import check_assumptions, find_critical_points
from ..base import ReebCommand


class Command(ReebCommand):
    help = 'Critical points of H and the assumption report: manage.py analyze --config doublewell.json'
    output_schema = {
        'critical_points': [{'x': 'float', 'y': 'float', 'h': 'float', 'kind': 'minimum|maximum|saddle',
                             'hess_eigenvalues': ['float', 'float']}],
        'assumptions': {'passed': 'bool', 'checks': [{'name': 'str', 'passed': 'bool', 'details': 'object'}]},
    }

    def add_command_arguments(self, parser):
        parser.add_argument('--ring-radius', type=float, default=10.0, help="radius of the growth-condition ring")

    def run(self, system, **options):
        points = find_critical_points(system)
        report = check_assumptions(system, ring_radius=options['ring_radius'], critical_points=points)
        self.emit_json({
            'system': system.name,
            'critical_points': [
                {'x': p.location[0], 'y': p.location[1], 'h': p.h_value, 'kind': p.kind,
                 'hess_eigenvalues': list(p.hess_eigenvalues)}
                for p in points
            ],
            'assumptions': report.to_json(),
        })
