"""
Configuration for seedlabel.

Defaults follow the published experimental setup. Environment variables
(optionally from a .env file) override the runtime knobs.
"""

import os
from typing import Dict, Optional

from dotenv import dotenv_values, load_dotenv

from seedlabel.errors import ConfigError

load_dotenv()

# ============================================================================
# RUNTIME
# ============================================================================

SEEDLABEL_JOBS_VAR = "SEEDLABEL_JOBS"
SEEDLABEL_LOG_LEVEL = os.getenv("SEEDLABEL_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

# ============================================================================
# PREPROCESSING
# ============================================================================

MIN_DF = 5
MIN_TOKEN_LEN = 3
LOWERCASE = True
STOPWORDS_FILE = os.path.join(os.path.dirname(__file__), "data", "stopwords.txt")

CORPUS_FORMAT = "seedlabel-corpus"
CORPUS_FORMAT_VERSION = 1

# ============================================================================
# MODEL HYPERPARAMETERS
# ============================================================================

MU = 0.3
PI = 1.0
P = 1.0
Q = 1.0
BETA0 = 0.01
BETA1 = 0.01
GAMMA0_NUMERATOR = 50.0  # gamma0 = 50 / C
GAMMA1 = 1e-7
EPSILON = 0.01

ITERATIONS = 100
RUNS = 10
RNG_SEED = 1

WORD_PROMOTION_MODES = ("cooccurrence", "embedding", "none")
ALPHA_FORMS = ("printed", "collapsed")

# ============================================================================
# SAMPLER
# ============================================================================

RECOUNT_EVERY = 20
NEGATIVE_COUNT_TOLERANCE = 1e-6
CONSISTENCY_RTOL = 1e-6

CHECKPOINT_FORMAT = "seedlabel-checkpoint"
CHECKPOINT_FORMAT_VERSION = 1

# ============================================================================
# SYNTHETIC DATA
# ============================================================================

SYNTH_CATEGORIES = 3
SYNTH_DOCUMENTS = 200
SYNTH_VOCAB_SIZE = 60
SYNTH_DOC_LENGTH = 50
SYNTH_CONCENTRATION = 5.0
SYNTH_SEEDS_PER_CATEGORY = 3
SYNTH_BACKGROUND_FRACTION = 0.4
SYNTH_OVERLAP = 0.0
SYNTH_MAX_LABELS = 2
SYNTH_CHISQUARE_ALPHA = 0.001


def default_jobs() -> int:
    """Chains run in parallel when --jobs is not given, from SEEDLABEL_JOBS (default 1)."""
    raw = os.getenv(SEEDLABEL_JOBS_VAR, "1")
    try:
        jobs = int(raw)
    except ValueError:
        raise ConfigError(f"{SEEDLABEL_JOBS_VAR} must be a positive integer, got '{raw}'") from None
    if jobs < 1:
        raise ConfigError(f"{SEEDLABEL_JOBS_VAR} must be a positive integer, got {jobs}")
    return jobs

def load_config_file(path: Optional[str]) -> Dict[str, str]:
    """
    Read a key=value config file.

    Keys are normalised to argparse destinations (``min-df`` -> ``min_df``).

    Args:
        path: Config file path, or None

    Returns:
        Dictionary of raw string values (empty when path is None)
    """
    if not path:
        return {}
    if not os.path.exists(path):
        raise ConfigError(f"Config file not found: {path}")

    values = dotenv_values(path)
    config = {}
    for key, value in values.items():
        if value is None:
            raise ConfigError(f"Config key without value in {path}: {key}")
        config[key.strip().lower().replace("-", "_")] = value
    return config
