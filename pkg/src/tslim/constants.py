import os

# CLI defaults
DEFAULT_VERBOSITY = 0
DEFAULT_SEED = 0
DEFAULT_OUTPUT_DIR = "tslim-out"

# Validation tolerances
SYMMETRY_RTOL = 1e-12  # covariance symmetry, relative to the largest entry
PSD_RTOL = 1e-12  # eigenvalue >= -PSD_RTOL * largest eigenvalue
ENTROPY_ATOL = 1e-9  # entropy production may dip this far below zero
MONOTONE_ATOL = 1e-12

# Integrators
MAX_CHECKPOINTS = 10_000
STABILITY_LIMIT = 2.0  # dt * lambda_max must stay below this
STABILITY_WARNING = 0.1
LANGEVIN_CHUNK = 4096  # realizations stepped together

# Quadrature
DEFAULT_N_QUAD = 4096  # Simpson panels
DEFAULT_N_LOG = 256  # log-spaced nodes near t = 0
LOG_DECADES = 6  # decades covered by the log-spaced nodes below T/10
CURVE_DECADES = 8  # decades below min(ts) covered by path-length curves
SPEED_CHUNK = 32  # time nodes per block when summing the speed over modes
DEFAULT_MP_NODES = 2048

# Experiment defaults
DEFAULT_N_POINTS = 20
DEFAULT_N_REALIZATIONS = 1000
DEFAULT_N_SEEDS = 1

# Trajectory archive
ARCHIVE_MAGIC = b"TSLW0001"
ARCHIVE_FORMAT = "tslw"
ARCHIVE_VERSION = 1
MANIFEST_FILE = "manifest.json"
METRICS_FILE = "metrics.csv"
WEIGHTS_FILE = "weights.bin"
DEFAULT_TIME_UNIT = "continuum training time (epoch x learning rate)"

# Output files
SUMMARY_FILE = "summary.json"
TSV_SUFFIX = ".tsv"
SIGNIFICANT_DIGITS = 17

# Flags attached to speed-limit reports
FLAG_SUB_UNITY = "sub_unity_inefficiency"
FLAG_ENTROPY_ERROR = "entropy_error"
FLAG_NO_BOUND = "no_admissible_bound"

# Entropy normalizations recorded in reports
NORMALIZATION_BETA_INV = "beta_inv_R"
NORMALIZATION_PER_SAMPLE = "n_beta_inv_R"

LIMIT_CORE_WORKERS = 16
# 1 if os.cpu_count() is None, copied from ProcessPoolExecutor in concurrent.futures
CPU_COUNT = os.cpu_count() or 1
MAX_CORE_WORKERS = min(CPU_COUNT, LIMIT_CORE_WORKERS)

# Debugging
DEBUG_MULTIPROCESSING = False
