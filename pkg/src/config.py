import os
from pathlib import Path


class Config:
    BASE_DIR = Path(os.environ.get("PMLAB_OUTPUT_DIR", "results"))
    MAX_WORKERS = int(os.environ.get("PMLAB_WORKERS", min(os.cpu_count() or 1, 8)))

    SCHEMA_VERSION = 1
    MAX_STEPS = 10**9
    DEFAULT_RNG_SEED = 20240917

    # Плотность орбит
    DEFAULT_RESOLUTION = 32
    DENSE_THRESHOLD = 1.0
    PERIOD_TOLERANCE = 1e-9
    PERIOD_CONFIRMATIONS = 3
    STALL_WINDOW = 0.1
    ASYMPTOTIC_DISTANCE = 1e-6
    FIELD_ZERO_TOLERANCE = 1e-12

    # Интегратор
    RTOL = 1e-9
    ATOL = 1e-11
    MAX_STEP = 0.05
    MIN_STEP = 1e-12
    MAX_WALL_STEPS = 100_000

    # Растры
    RASTER_SAMPLES_PER_AXIS = 4
    RASTER_MAGIC = b"PMRS"
