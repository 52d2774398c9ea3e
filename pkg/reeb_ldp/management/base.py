import json
import time
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from ..analysis.averaged_coeffs import tabulate_edge
from ..analysis.reeb_graph import build_reeb_graph
from ..conf import get_threads
from ..errors import ConfigError, ReebLdpError
from ..utils.config import load_system
from ..utils.logger import logger
from ..utils.manifest import manifest_digest, record_manifest
from ..utils.output import write_csv, write_json
from ..utils.parallel import ParallelMap


class ReebCommand(BaseCommand):
    """Shared flags, error mapping and output plumbing of the reeb-ldp subcommands.

    Subclasses implement ``add_command_arguments`` and ``run(system, **options)``
    and write results through ``emit_json``/``emit_csv``. ConfigError and bad
    flag values exit with code 2, any other library error with code 1.
    """

    requires_system_checks = []
    needs_system = True
    output_schema = {}

    @property
    def command_name(self):
        return self.__module__.rsplit('.', 1)[-1]

    def add_arguments(self, parser):
        parser.add_argument('--config', help="system JSON config, or builtin:<name>")
        parser.add_argument('--seed', type=int, default=0, help="seed base of every random stream")
        parser.add_argument('--threads', type=int, default=get_threads(),
                            help="worker processes (default: REEB_LDP_THREADS)")
        parser.add_argument('--out', default=None, help="output file (default: stdout)")
        parser.add_argument('--schema', action='store_true', help="print the output schema and exit")
        self.add_command_arguments(parser)

    def add_command_arguments(self, parser):
        pass

    def handle(self, *args, **options):
        if options['schema']:
            self.stdout.write(json.dumps(self.output_schema, indent=2, sort_keys=True))
            return
        started = time.perf_counter()
        self.options = options
        self.outputs = []
        self.pmap = ParallelMap(options['threads'])
        try:
            system = load_system(options.get('config')) if self.needs_system else None
            self.digest = manifest_digest(self.command_name, options,
                                          system.to_config() if system is not None else None)
            self.run(system, **options)
        except ConfigError as exc:
            logger.error(f"{self.command_name}: {exc}", exc_info=True)
            raise CommandError(str(exc), returncode=2) from exc
        except ValueError as exc:
            logger.error(f"{self.command_name}: invalid parameters: {exc}", exc_info=True)
            raise CommandError(str(exc), returncode=2) from exc
        except ReebLdpError as exc:
            logger.error(f"{self.command_name}: {type(exc).__name__}: {exc}", exc_info=True)
            raise CommandError(f"{type(exc).__name__}: {exc}", returncode=1) from exc
        wall = time.perf_counter() - started
        record_manifest(self.digest, self.command_name, options['seed'], self.outputs, wall)
        logger.info(f"{self.command_name} finished in {wall:.2f}s [{self.digest[:12]}]")

    def run(self, system, **options):
        raise NotImplementedError

    def emit_json(self, doc, path=None):
        path = self.options['out'] if path is None else path
        write_json(path, doc, self.digest, stream=self.stdout)
        self.outputs.append(str(path or '-'))

    def emit_csv(self, header, rows, path=None):
        path = self.options['out'] if path is None else path
        write_csv(path, header, rows, self.digest, stream=self.stdout)
        self.outputs.append(str(path or '-'))

    def sibling_path(self, suffix):
        """``--out`` with its extension replaced, or None when writing to stdout."""
        out = self.options['out']
        if out in (None, '-'):
            return None
        return str(Path(out).with_suffix(suffix))

    def graph_for(self, system):
        return build_reeb_graph(system, grid_n=self.options.get('grid'))

    def tables_for(self, system, graph, edge_ids):
        return {int(e): tabulate_edge(system, graph, int(e), n_interior=self.options.get('n_interior'),
                                      pmap=self.pmap)
                for e in sorted(set(int(e) for e in edge_ids))}
