"""
This module contains configuration settings for the solver kernel.
"""

import logging
import os

# Logging level
LOG_LEVEL = getattr(logging, os.environ.get("CIPKIT_LOG_LEVEL", "INFO").upper(), logging.INFO)

# Values at or beyond this magnitude are treated as infinite
INFINITY = 1e20

# Solve limits
TIME_LIMIT = float(os.environ.get("CIPKIT_TIME_LIMIT", 60))
NODE_LIMIT = int(os.environ.get("CIPKIT_NODE_LIMIT", 100000))

# Simplex settings
LP_ITER_LIMIT = int(os.environ.get("CIPKIT_LP_ITER_LIMIT", 10000))
REFACTOR_FREQ = int(os.environ.get("CIPKIT_REFACTOR_FREQ", 50))
MAX_CONDITION = float(os.environ.get("CIPKIT_MAX_CONDITION", 1e12))

# Cut settings
MAX_CUT_DYNAMISM = 1e7
MIN_CUT_EFFICACY = 1e-6
MAX_CUT_ROUNDS = int(os.environ.get("CIPKIT_MAX_CUT_ROUNDS", 3))
MAX_CUT_DEPTH = int(os.environ.get("CIPKIT_MAX_CUT_DEPTH", 4))

# Branch-and-bound settings
GAP_LIMIT = 1e-6
PLUNGE_DEPTH = 2

# Symmetry search budget (search tree nodes)
SYMMETRY_NODE_LIMIT = int(os.environ.get("CIPKIT_SYMMETRY_NODE_LIMIT", 20000))

# Brute-force oracle budget (integer assignments)
BRUTE_FORCE_LIMIT = int(os.environ.get("CIPKIT_BRUTE_FORCE_LIMIT", 100000))

# Signomial separator
SIGNOMIAL_MAX_UNDERVARS = int(os.environ.get("CIPKIT_SIGNOMIAL_MAX_UNDERVARS", 10))

# Bench and dashboard
BENCH_DB_PATH = os.environ.get("CIPKIT_BENCH_DB", "cipkit_bench.db")
BENCH_WORKERS = int(os.environ.get("CIPKIT_BENCH_WORKERS", 1))
BENCH_TIME_SHIFT = 1.0
BENCH_NODE_SHIFT = 100.0
BENCH_BRACKETS = (0.0, 1.0, 10.0, 100.0)
DASHBOARD_PORT = int(os.environ.get("CIPKIT_DASHBOARD_PORT", 8080))
