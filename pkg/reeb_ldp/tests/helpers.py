import os
from functools import lru_cache
from unittest import skipUnless

import numpy as np

from ..analysis.averaged_coeffs import tabulate_graph
from ..analysis.hamiltonian_field import builtin_system
from ..analysis.reeb_graph import GraphPath, GraphPoint, build_reeb_graph

slow = skipUnless(os.getenv('REEB_LDP_SLOW_TESTS') == '1', "slow Monte Carlo run (set REEB_LDP_SLOW_TESTS=1)")


@lru_cache(maxsize=None)
def system(name, sigma_zero=False):
    if sigma_zero:
        return builtin_system(name, sigma={'constant': [[0.0, 0.0], [0.0, 0.0]]})
    return builtin_system(name)


@lru_cache(maxsize=None)
def graph(name, grid_n=256, sigma_zero=False):
    return build_reeb_graph(system(name, sigma_zero), grid_n=grid_n)


@lru_cache(maxsize=None)
def tables(name, sigma_zero=False):
    return tabulate_graph(system(name, sigma_zero), graph(name, sigma_zero=sigma_zero))


def ramp(g, edge_id, h0, h1, horizon=1.0, n=1000):
    times = np.linspace(0.0, horizon, n + 1)
    hs = np.linspace(h0, h1, n + 1)
    return GraphPath.from_points(g, times, [GraphPoint(edge_id, float(h)) for h in hs])
