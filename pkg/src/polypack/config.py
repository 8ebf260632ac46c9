"""
Configuration module for polypack.

This module loads configuration from environment variables.
"""

import os
from dotenv import load_dotenv

# Load environment variables from the .env file at the repository root
dotenv_path = os.path.abspath(os.path.join(os.path.dirname(__file__), '..', '..', '.env'))
load_dotenv(dotenv_path=dotenv_path)


def _env_value(name, default):
    """Read an environment variable, dropping any trailing '# comment'."""
    value = os.getenv(name)
    if value is None:
        return default
    value = value.split('#')[0].strip()
    return value if value else default


def _env_float(name, default):
    return float(_env_value(name, default))


def _env_int(name, default):
    return int(_env_value(name, default))


# Concurrency and storage
POLYPACK_THREADS = max(1, _env_int('POLYPACK_THREADS', 1))
STORE_ROOT = _env_value('POLYPACK_STORE', 'records_store')
LOG_LEVEL = _env_value('POLYPACK_LOG_LEVEL', 'INFO').upper()

# Annealing schedule
S_IN = _env_float('POLYPACK_S_IN', 10.0)
S_FIN = _env_float('POLYPACK_S_FIN', 1.0e6)
KAPPA = _env_float('POLYPACK_KAPPA', 1.8)
ALPHA0 = _env_float('POLYPACK_ALPHA0', -0.5)
EPS_BORDER = _env_float('POLYPACK_EPS_BORDER', 0.05)
GRAD_TOL = _env_float('POLYPACK_GRAD_TOL', 1.0e-10)
MAX_ITER_PER_S = _env_int('POLYPACK_MAX_ITER', 2000)
RESTARTS = _env_int('POLYPACK_RESTARTS', 20)

# Contact polish after the last annealing stage
POLISH = _env_value('POLYPACK_POLISH', 'true').lower() in ('1', 'true', 'yes')
POLISH_TRUST = _env_float('POLYPACK_POLISH_TRUST', 0.05)
POLISH_MAX_ITER = _env_int('POLYPACK_POLISH_MAX_ITER', 500)

# Shake and variance refinement
SHAKE_S_IN = _env_float('POLYPACK_SHAKE_S_IN', 100.0)
SHAKE_AMPLITUDE = _env_float('POLYPACK_SHAKE_AMPLITUDE', 1.0e-2)
RUNS_PER_CYCLE = _env_int('POLYPACK_RUNS_PER_CYCLE', 50)
STEP_SCALE = _env_float('POLYPACK_STEP_SCALE', 1.0e-4)
ETA_FACTOR = _env_float('POLYPACK_ETA_FACTOR', 1.0e-3)

# Analysis tolerances
CONTACT_TOL = _env_float('POLYPACK_CONTACT_TOL', 1.0e-9)
NECKLACE_TOL = _env_float('POLYPACK_NECKLACE_TOL', 1.0e-10)
MERGE_TOL = _env_float('POLYPACK_MERGE_TOL', 1.0e-6)
HOLE_TOL = _env_float('POLYPACK_HOLE_TOL', 1.0e-6)
AUDIT_TOL = _env_float('POLYPACK_AUDIT_TOL', 1.0e-9)

# Batch sweep envelope
BATCH_SIGMA_RANGE = (3, 16)
BATCH_N_RANGE = (2, 200)
