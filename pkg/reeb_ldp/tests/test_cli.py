import json
import math
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import TestCase

from .. import cli
from ..models import RunManifest
from ..utils.output import read_csv


def run_json(*args, **options):
    out = StringIO()
    call_command(*args, stdout=out, **options)
    return json.loads(out.getvalue())


class CommandTests(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.addCleanup(self.tmp.cleanup)
        self.dir = Path(self.tmp.name)

    def test_graph_export(self):
        doc = run_json('graph', 'export', config='builtin:doublewell')
        self.assertEqual(len(doc['vertices']), 3)
        self.assertEqual(len(doc['edges']), 3)
        self.assertEqual(len(doc['manifest']), 64)

    def test_coefficient_table(self):
        target = self.dir / 'harmonic.csv'
        call_command('coeffs', config='builtin:harmonic', edge=[0], out=str(target))
        rows = read_csv(target)
        self.assertGreater(len(rows), 32)
        for row in rows:
            h, t, b2 = float(row['h']), float(row['T']), float(row['B2'])
            self.assertAlmostEqual(t / (2 * math.pi), 1.0, delta=1e-5)
            self.assertAlmostEqual(b2 / (2 * h), 1.0, delta=1e-5)
        header = target.read_text().splitlines()[0]
        self.assertTrue(header.startswith('# manifest='))

    def test_manifest_is_recorded_and_reruns_are_identical(self):
        first, second = self.dir / 'a.csv', self.dir / 'b.csv'
        call_command('coeffs', config='builtin:harmonic', edge=[0], n_interior=16, out=str(first))
        call_command('coeffs', config='builtin:harmonic', edge=[0], n_interior=16, out=str(second))
        self.assertEqual(first.read_text(), second.read_text())
        digest = first.read_text().splitlines()[0].split('=', 1)[1]
        manifest = RunManifest.objects.get(digest=digest)
        self.assertEqual(manifest.command, 'coeffs')
        self.assertEqual(manifest.runs, 2)
        self.assertEqual(sorted(manifest.output_paths), sorted([str(first), str(second)]))

    def test_seed_changes_the_digest(self):
        a = run_json('graph', 'export', config='builtin:harmonic', seed=1)
        b = run_json('graph', 'export', config='builtin:harmonic', seed=2)
        self.assertNotEqual(a['manifest'], b['manifest'])

    def test_schema(self):
        doc = run_json('coeffs', schema=True)
        self.assertEqual(doc['csv_columns'], ['edge_id', 'h', 'T', 'B2'])
        self.assertFalse(RunManifest.objects.exists())

    def test_unknown_edge(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('coeffs', config='builtin:harmonic', edge=[5], stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 2)

    def test_simulate_clamps_an_oversized_step(self):
        out = self.dir / 'run.csv'
        call_command('simulate', config='builtin:harmonic', epsilon=0.1, beta=0.5, horizon=0.2, x0='1,1',
                     dt=0.05, n_interior=16, out=str(out))
        summary = json.loads((self.dir / 'run.summary.json').read_text())
        self.assertAlmostEqual(summary['t_min'], 2 * math.pi, delta=1e-4)
        self.assertEqual(summary['dt_requested'], 0.05)
        self.assertAlmostEqual(summary['config']['dt_fast'], 0.05 * math.sqrt(0.1), places=12)
        rows = read_csv(out)
        step = float(rows[1]['t']) - float(rows[0]['t'])
        self.assertAlmostEqual(step, 0.05 * math.sqrt(0.1), places=9)

    def test_simulate_without_dt_uses_the_policy(self):
        out = self.dir / 'run.csv'
        call_command('simulate', config='builtin:harmonic', epsilon=0.1, beta=0.5, horizon=0.2, x0='1,1',
                     n_interior=16, out=str(out))
        summary = json.loads((self.dir / 'run.summary.json').read_text())
        self.assertIsNone(summary['dt_requested'])
        self.assertAlmostEqual(summary['config']['dt_fast'], 0.05 * math.sqrt(0.1), places=12)

    def test_simulate_to_stdout_reports_the_summary_on_stderr(self):
        out, err = StringIO(), StringIO()
        call_command('simulate', config='builtin:harmonic', epsilon=0.1, beta=0.5, horizon=0.1, x0='1,1',
                     paths=4, n_interior=16, stdout=out, stderr=err)
        self.assertTrue(out.getvalue().startswith('# manifest='))
        summary = json.loads(err.getvalue())
        self.assertEqual(summary['manifest'], out.getvalue().splitlines()[0].split('=', 1)[1])
        self.assertIn('averaging', summary)

    def test_minimize_writes_the_path(self):
        out = self.dir / 'min.json'
        call_command('action', 'minimize', config='builtin:harmonic', y_from='0:1', y_to='0:2', horizon=1.0,
                     n_time=100, n_h=100, out=str(out))
        doc = json.loads(out.read_text())
        self.assertAlmostEqual(doc['action'], (math.sqrt(2) - 1) ** 2, delta=1e-3)
        rows = read_csv(doc['path_csv'])
        self.assertEqual(len(rows), 101)
        again = run_json('action', 'eval', config='builtin:harmonic', path=doc['path_csv'])
        self.assertAlmostEqual(again['action'], doc['action'], delta=1e-3)

    def test_brownian_oracle(self):
        doc = run_json('oracle', 'brownian', case='reflection', paths=20_000)
        report, = doc['reports']
        self.assertAlmostEqual(report['exact'], 0.317311, places=5)
        self.assertLess(abs(report['probability'] - report['exact']), 0.02)


class EntryPointTests(TestCase):
    def test_missing_config_exits_with_two(self):
        self.assertEqual(cli.run(['graph']), 2)

    def test_unreadable_config_exits_with_two(self):
        self.assertEqual(cli.run(['graph', '--config', '/nonexistent/system.json']), 2)

    def test_unknown_subcommand(self):
        self.assertEqual(cli.run(['serve']), 2)
        self.assertEqual(cli.run([]), 2)

    def test_success(self):
        with tempfile.TemporaryDirectory() as tmp:
            target = Path(tmp) / 'graph.json'
            self.assertEqual(cli.run(['graph', '--config', 'builtin:harmonic', '--out', str(target)]), 0)
            self.assertEqual(len(json.loads(target.read_text())['vertices']), 1)
