from __future__ import annotations

DOMAIN = "thetacf"

COMMANDS: list[str] = [
    "expand",
    "gk",
    "chain",
    "operator",
    "levy",
    "extension",
    "khinchin",
    "digits",
]

# Config keys (shared by every command)
CONF_COMMAND = "command"
CONF_M = "m"
CONF_SEED = "seed"
CONF_THREADS = "threads"
CONF_OUT = "out"
CONF_FORMAT = "format"
CONF_PRECISION = "precision"

# Command-specific keys
CONF_X = "x"
CONF_N = "n"
CONF_N_MAX = "n_max"
CONF_SAMPLES = "samples"
CONF_GRID = "grid"
CONF_X_GRID = "x_grid"
CONF_TAIL_EPS = "tail_eps"
CONF_MEASURE = "measure"
CONF_START = "start"
CONF_STEPS = "steps"
CONF_FORCE_DIGIT = "force_digit"
CONF_FIXED_POINT_CHECK = "fixed_point_check"
CONF_NORM = "norm"
CONF_DEPTH = "depth"
CONF_MAX_EXCESS = "max_excess"
CONF_CHECKPOINTS = "checkpoints"
CONF_MC_PRECISION = "mc_precision"
CONF_VERBOSE = "verbose"

# Field
MIN_M = 1
MAX_M = 10_000

# Precision (bits)
DEFAULT_PRECISION = 128
MIN_PRECISION = 53
MAX_PRECISION = 4096
# Monte-Carlo orbit kernels: float64 up to 53 bits, double-double up to 106, mpmath above
FLOAT64_PRECISION = 53
DOUBLE_DOUBLE_PRECISION = 106
DEFAULT_MC_PRECISION = DOUBLE_DOUBLE_PRECISION

# Expansion
DEFAULT_EXPAND_N = 20
DEFAULT_EXPAND_MAX = 10_000

# Series
DEFAULT_TAIL_EPS = 1e-12
MIN_TAIL_EPS = 1e-30
DEFAULT_MAX_TERMS = 100_000

# Operator grid
DEFAULT_GRID_SIZE = 2048
MIN_GRID_SIZE = 2
MAX_GRID_SIZE = 4096
OPERATOR_ROW_CHUNK = 64
POWER_ITERATION_MAX = 500
POWER_ITERATION_TOL = 1e-15
NORM_SUP = "sup"
NORM_LIPSCHITZ = "lipschitz"
NORMS = [NORM_SUP, NORM_LIPSCHITZ]
DENSITY_NORMALIZATION_TOL = 1e-6
DECAY_FLOOR_FACTOR = 1e2
MIN_DECAY_ITERATIONS = 4
DEFAULT_DECAY_N_MAX = 25

# Measures
MEASURE_LEBESGUE = "lebesgue"
MEASURE_GAMMA = "gamma"
MEASURE_GAMMA_A = "gamma_a"
MEASURE_CUSTOM = "custom_density"
MEASURE_GAMMA_A_PREFIX = "gamma-a:"
MEASURE_GAMMA_A_HALF = "half"

# Monte-Carlo
DEFAULT_SEED = 0
MAX_SEED = 2**64 - 1
DEFAULT_SAMPLES = 100_000
MIN_GK_SAMPLES = 10_000
DEFAULT_GK_N_MAX = 15
DEFAULT_X_GRID = 101
DEFAULT_THREADS = 1
MAX_THREADS = 256
MC_CHUNK_SIZE = 1 << 16
REJECTION_BATCH = 1 << 14
REJECTION_MAX_ROUNDS = 1000

# Chain
DEFAULT_CHAIN_STEPS = 20
FORCE_DIGIT_M = "m"

# Levy / Khinchin
DEFAULT_LEVY_SAMPLES = 200
DEFAULT_LEVY_N = 10_000
MIN_LEVY_N = 100
MIN_LEVY_SAMPLES = 100
LEVY_RESCALE_EVERY = 50
DEFAULT_KHINCHIN_SAMPLES = 100
DEFAULT_KHINCHIN_CHECKPOINTS = [10, 100, 1000, 10_000]

# Natural extension sweep
DEFAULT_SWEEP_DEPTH = 3
DEFAULT_SWEEP_MAX_EXCESS = 5
MAX_SWEEP_DEPTH = 5

# Digit frequency
DEFAULT_DIGIT_TABLE = 10
MIN_DIGIT_SAMPLES = 10_000
DEFAULT_DIGIT_N = 20

# Output
FORMAT_CSV = "csv"
FORMAT_JSON = "json"
FORMATS = [FORMAT_CSV, FORMAT_JSON]

# Exit codes
EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4


# EOF
