import os
from pathlib import Path

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Logging
LOG_LEVEL = os.getenv("ALM_RATES_LOG_LEVEL", "INFO").strip().upper()

# Base directories
BASE_DIR = Path(__file__).parent.parent
CONFIGS_DIR = BASE_DIR / "configs"
OUTPUT_DIR = os.getenv("ALM_RATES_OUTPUT_DIR", "results")

# Sweep parallelism
try:
    THREADS = int(os.getenv("ALM_RATES_THREADS", "1"))
except ValueError:
    THREADS = 1

# Solver caps and tolerances
try:
    MAX_OUTER_ITERATIONS = int(os.getenv("ALM_RATES_MAX_OUTER_ITERATIONS", "1000000"))
except ValueError:
    MAX_OUTER_ITERATIONS = 1_000_000
try:
    MAX_INNER_ITERATIONS = int(os.getenv("ALM_RATES_MAX_INNER_ITERATIONS", "50000"))
except ValueError:
    MAX_INNER_ITERATIONS = 50_000
try:
    INNER_TOL = float(os.getenv("ALM_RATES_INNER_TOL", "1e-10"))
except ValueError:
    INNER_TOL = 1e-10

# Dense SVD is only attempted up to this size
SVD_SIZE_LIMIT = 2000
