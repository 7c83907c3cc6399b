import os
import logging
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

# Base directory of the project
BASE_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))

# --- Data Directories ---
DATA_DIR = os.path.join(BASE_DIR, 'data')
FIXTURES_DIR = os.path.join(DATA_DIR, 'fixtures')

# --- Cone Tolerances ---
# Symmetry tolerance is relative: sym_tol = SYM_TOL_REL * (1 + max|X|)
SYM_TOL_REL = float(os.getenv("MPCLO_SYM_TOL_REL", "1e-9"))
EIG_TOL = float(os.getenv("MPCLO_EIG_TOL", "1e-9"))

# --- Model Tolerances ---
ORTH_TOL_REL = float(os.getenv("MPCLO_ORTH_TOL_REL", "1e-8"))
RANK_TOL_REL = float(os.getenv("MPCLO_RANK_TOL_REL", "1e-8"))
# "correct" maps through G^-1, "substitute" reports raw M(x - d)
GRAM_MODE = os.getenv("MPCLO_GRAM_MODE", "correct")

# --- Solver Configuration ---
FEAS_TOL = float(os.getenv("MPCLO_FEAS_TOL", "1e-8"))
GAP_TOL = float(os.getenv("MPCLO_GAP_TOL", "1e-8"))
FACE_EPS = float(os.getenv("MPCLO_FACE_EPS", "1e-7"))
# Retries of the relaxed optimal-face cut, FACE_EPS growing by FACE_EPS_GROWTH each time
FACE_RETRIES = int(os.getenv("MPCLO_FACE_RETRIES", "2"))
FACE_EPS_GROWTH = float(os.getenv("MPCLO_FACE_EPS_GROWTH", "100.0"))
MAX_ITER = int(os.getenv("MPCLO_MAX_ITER", "200"))
# cvxopt and HiGHS stop at this fraction of FEAS_TOL / GAP_TOL
INNER_TOL_FACTOR = float(os.getenv("MPCLO_INNER_TOL_FACTOR", "0.1"))
COND_MAX = float(os.getenv("MPCLO_COND_MAX", "1e14"))
# Caps keeping the max-margin feasibility problem bounded
MARGIN_CAP = float(os.getenv("MPCLO_MARGIN_CAP", "1.0"))
TRACE_CAP = float(os.getenv("MPCLO_TRACE_CAP", "1e4"))

# --- Mapping Configuration ---
SET_TOL = float(os.getenv("MPCLO_SET_TOL", "1e-5"))
MEM_TOL = float(os.getenv("MPCLO_MEM_TOL", "1e-6"))
FD_DELTA = float(os.getenv("MPCLO_FD_DELTA", "1e-4"))
N_DIRS_2D = int(os.getenv("MPCLO_N_DIRS_2D", "16"))

# --- Partition Configuration ---
TOL_PARAM = float(os.getenv("MPCLO_TOL_PARAM", "1e-6"))
QUANT = float(os.getenv("MPCLO_QUANT", "1e-4"))
DIM_TOL_REL = float(os.getenv("MPCLO_DIM_TOL_REL", "1e-3"))
CONT_FACTOR = float(os.getenv("MPCLO_CONT_FACTOR", "4.0"))
JOBS = int(os.getenv("MPCLO_JOBS", "1"))  # Worker processes for grid sweeps
# A failed sample is retried once with solver tolerances loosened by this factor
RETRY_RELAX = float(os.getenv("MPCLO_RETRY_RELAX", "10.0"))
SEED = int(os.getenv("MPCLO_SEED", "0"))

# --- Verification ---
VERIFY_TOL = float(os.getenv("MPCLO_VERIFY_TOL", "1e-6"))

# --- Logging ---
LOG_FILE = os.getenv("MPCLO_LOG_FILE", os.path.join(BASE_DIR, 'mpclo.log'))
LOG_LEVEL = logging.INFO  # Can be DEBUG, INFO, WARNING, ERROR
