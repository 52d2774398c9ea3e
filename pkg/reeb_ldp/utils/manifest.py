import hashlib
import json

from django.db import DatabaseError

from .. import __version__
from .logger import logger

# keys that never change results
VOLATILE = {'threads', 'wall_clock', 'verbosity', 'traceback', 'no_color', 'force_color',
            'settings', 'pythonpath', 'skip_checks', 'schema', 'out', 'config', 'stdout', 'stderr'}


def manifest_digest(command, options, system_config=None):
    doc = {
        'command': command,
        'options': {k: v for k, v in sorted(options.items()) if k not in VOLATILE},
        'system': system_config,
        'version': __version__,
    }
    text = json.dumps(doc, sort_keys=True, separators=(',', ':'), default=str)
    return hashlib.sha256(text.encode('utf-8')).hexdigest()


def record_manifest(digest, command, seed_base, output_paths, wall_clock):
    """Store or refresh the manifest row; database problems are logged, never raised."""
    from ..models import RunManifest

    try:
        manifest, created = RunManifest.objects.get_or_create(
            digest=digest,
            defaults={
                'command': command,
                'seed_base': seed_base,
                'tool_version': __version__,
                'output_paths': list(output_paths),
                'wall_clock': wall_clock,
            },
        )
        if not created:
            manifest.runs += 1
            manifest.wall_clock = wall_clock
            manifest.output_paths = sorted(set(manifest.output_paths) | set(output_paths))
            manifest.save(update_fields=['runs', 'wall_clock', 'output_paths', 'last_run_at'])
        return manifest
    except DatabaseError as exc:
        logger.warning(f"Run manifest not recorded ({exc}); run `manage.py migrate` to create the table")
        return None
