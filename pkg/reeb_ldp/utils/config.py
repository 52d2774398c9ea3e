import json
from pathlib import Path

from ..analysis.hamiltonian_field import BUILTINS, builtin_system, system_from_config
from ..errors import ConfigError
from .logger import logger


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ConfigError("config file not found", path=str(path))
    try:
        with path.open(encoding='utf-8') as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc.msg}", path=str(path), line=exc.lineno) from exc


def load_system(source):
    """A system from a JSON file path, or ``builtin:<name>`` for the shipped Hamiltonians."""
    if source is None:
        raise ConfigError("a system config is required (--config)")
    source = str(source)
    if source.startswith('builtin:'):
        name = source.split(':', 1)[1]
        if name not in BUILTINS:
            raise ConfigError(f"unknown builtin Hamiltonian '{name}'", known=sorted(BUILTINS))
        return builtin_system(name)
    system = system_from_config(read_json(source))
    logger.info(f"Loaded system '{system.name}' from {source}")
    return system


def parse_floats(text, name):
    try:
        return tuple(float(x) for x in str(text).split(',') if x.strip())
    except ValueError:
        raise ConfigError(f"--{name} expects comma-separated numbers", value=text) from None
