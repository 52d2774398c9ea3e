"""Numerical defaults, overridable through ``settings.REEB_LDP``."""

DEFAULTS = {
    # marching-squares census grid per axis
    'census_grid': 512,
    # seed grid for the critical-point search
    'critical_grid': 64,
    # probe offset around saddle levels
    'delta_wire': 1e-3,
    # full projection resync period along trajectories
    'resync_every': 64,
    # energy guard band around vertex values
    'guard': 1e-4,
    'n_interior': 32,
    'trace_tol': 1e-9,
    # below this B^2 a moving path has infinite action
    'b2_floor': 1e-10,
    # dt <= c_dt * eps^(1-beta)
    'c_dt': 0.05,
    # dt policy factor in front of eps^(1-beta) * T_min
    'dt_factor': 0.02,
    # trajectories per Philox key
    'rng_block': 1024,
    # largest |Hess H| (Frobenius) accepted on the working box
    'hessian_bound': 1e3,
    'chart_tol': 1e-8,
    'chart_grid': 64,
}


def get_setting(name):
    from django.conf import settings

    if name not in DEFAULTS:
        raise KeyError(name)
    if settings.configured:
        return getattr(settings, 'REEB_LDP', {}).get(name, DEFAULTS[name])
    return DEFAULTS[name]


def get_threads():
    import os

    from django.conf import settings

    if settings.configured:
        return int(getattr(settings, 'REEB_LDP_THREADS', 1))
    return int(os.getenv('REEB_LDP_THREADS', '1'))
