"""
Django settings for the reeb_ldp_project project.

The project has no web surface: Django provides the management-command
CLI, the settings layer and the ORM-backed manifest store.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / '.env')

SECRET_KEY = os.getenv('REEB_LDP_SECRET_KEY', 'reeb-ldp-local-only')

DEBUG = False

ALLOWED_HOSTS = []


# Application definition

INSTALLED_APPS = [
    'django.contrib.contenttypes',
    'reeb_ldp',
]


# Database
# Run manifests are recorded here; `python manage.py migrate` creates the table.

DATABASES = {
    'default': {
        'ENGINE': 'django.db.backends.sqlite3',
        'NAME': os.getenv('REEB_LDP_DB', str(BASE_DIR / 'db.sqlite3')),
    }
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'


# Worker pool and logging

REEB_LDP_THREADS = int(os.getenv('REEB_LDP_THREADS', '1'))

REEB_LDP_LOG_DIR = os.getenv('REEB_LDP_LOG_DIR', 'logs')


# Numerical defaults (see reeb_ldp.conf for the meaning of each key)

REEB_LDP = {
    'census_grid': 512,
    'critical_grid': 64,
    'delta_wire': 1e-3,
    'resync_every': 64,
    'guard': 1e-4,
    'n_interior': 32,
    'trace_tol': 1e-9,
    'b2_floor': 1e-10,
    'c_dt': 0.05,
    'dt_factor': 0.02,
    'rng_block': 1024,
    'hessian_bound': 1e3,
    'chart_tol': 1e-8,
    'chart_grid': 64,
}
