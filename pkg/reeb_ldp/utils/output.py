"""CSV/JSON writers. Floats are written with 17 significant digits and every
file cites the run manifest digest."""

import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np


def fmt(value):
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    if isinstance(value, (np.integer,)):
        return str(int(value))
    if value is None:
        return ''
    return str(value)


def _default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset, tuple)):
        return list(obj)
    raise TypeError(f"{type(obj).__name__} is not JSON serializable")


def _clean(obj):
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


@contextmanager
def _target(path, stream=None):
    if path in (None, '-'):
        yield stream or sys.stdout
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('w', encoding='utf-8', newline='') as fh:
        yield fh


def write_csv(path, header, rows, digest, stream=None):
    with _target(path, stream) as fh:
        fh.write(f"# manifest={digest}\n")
        fh.write(','.join(header) + '\n')
        for row in rows:
            fh.write(','.join(fmt(v) for v in row) + '\n')


def read_csv(path):
    """Rows of a CSV written by ``write_csv`` (comment lines skipped) as dicts of strings."""
    with open(path, encoding='utf-8') as fh:
        lines = [line.strip() for line in fh if line.strip() and not line.startswith('#')]
    header = lines[0].split(',')
    return [dict(zip(header, line.split(','))) for line in lines[1:]]


def to_json_text(doc, digest):
    doc = {'manifest': digest, **doc}
    return json.dumps(_clean(json.loads(json.dumps(doc, default=_default))), indent=2, sort_keys=True)


def write_json(path, doc, digest, stream=None):
    with _target(path, stream) as fh:
        fh.write(to_json_text(doc, digest) + '\n')
