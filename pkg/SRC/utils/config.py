import os

from dotenv import load_dotenv

load_dotenv()

DEFAULT_SEED = int(os.getenv("L1INDEP_SEED", "20240601"))
DEFAULT_THREADS = int(os.getenv("L1INDEP_THREADS", "1"))

# permutation replicates B and Monte Carlo null-table size N
DEFAULT_PERMUTATIONS = int(os.getenv("L1INDEP_PERMUTATIONS", "999"))
DEFAULT_TABLE_DRAWS = int(os.getenv("L1INDEP_TABLE_DRAWS", "10000"))

# fixed unit-cube partition used by null tables and large-deviation runs
DEFAULT_GRID_CELLS = int(os.getenv("L1INDEP_GRID_CELLS", "4"))

# replicates per joblib task; results depend only on per-replicate seeds
REPLICATE_CHUNK_SIZE = int(os.getenv("L1INDEP_CHUNK_SIZE", "256"))

MIN_PERMUTATIONS = 99
MIN_TABLE_DRAWS = 100
MIN_TAIL_DRAWS = 1000
MIN_SLOPE_REPS = 20

FORMAT_VERSION = 1
