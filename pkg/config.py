"""
Configuration settings for the shock calibration toolkit.
"""
import os
from pathlib import Path

from dotenv import load_dotenv

basedir = Path(__file__).parent.absolute()

# Optional local overrides (SHOCKCAL_* variables)
load_dotenv(basedir / '.env')


class Config:
    """Base configuration."""

    # Runtime
    LOG_LEVEL = os.environ.get('SHOCKCAL_LOG_LEVEL', 'INFO').upper()
    THREADS = int(os.environ.get('SHOCKCAL_THREADS') or os.cpu_count() or 1)
    MASTER_SEED = int(os.environ.get('SHOCKCAL_SEED') or 20190604)

    # Output locations
    DATA_FOLDER = basedir / 'data'
    RUNS_FOLDER = basedir / 'runs'

    # Drop-test rig
    N_PAIRS = 660
    TRAIN_COUNT = 500
    PEAK_MIN = 500.0      # g
    PEAK_MAX = 8000.0     # g
    SAMPLE_RATE = 200_000.0  # Hz

    # Preprocessing window: 2.5 ms before and 12.5 ms after the peak
    PRE_PEAK_SECONDS = 2.5e-3
    WINDOW_SECONDS = 15e-3

    # Calibration network
    HIDDEN_WIDTH = 1024
    LATENT_WIDTH = 256
    PPN_WIDTH = 8
    PPN_HIDDEN = 16
    PEAK_SCALE = 10_000.0  # g

    # Training
    EPOCHS = 300
    BATCH_SIZE = 32
    LEARNING_RATE = 1e-3
    PPN_LEARNING_RATE = 2e-3

    # Ablation study
    ABLATION_SEEDS = 3

    # Shock response spectrum
    SRS_F_MIN = 100.0
    SRS_F_MAX = 10_000.0
    SRS_POINTS_PER_OCTAVE = 6
    SRS_Q = 10.0

    # Baselines
    LPF_CUTOFF = 5_000.0          # Hz
    LPF_TRANSITION = 2_000.0      # Hz
    RIDGE_LAMBDA = 1.0

    # Gradient check
    GRADCHECK_DIMS = (30, 8, 4)
    GRADCHECK_POINTS = 20
    GRADCHECK_TOLERANCE = 1e-4


class DevelopmentConfig(Config):
    """Development configuration: short training runs."""
    EPOCHS = 20
    ABLATION_SEEDS = 1


class ProductionConfig(Config):
    """Production configuration: full reproduction defaults."""


# Config dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'default': ProductionConfig
}


def get_config(name=None):
    """Return the configuration class selected by name or SHOCKCAL_ENV."""
    name = name or os.environ.get('SHOCKCAL_ENV', 'default')
    return config.get(name, config['default'])
