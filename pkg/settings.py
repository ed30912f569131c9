"""
Shared configuration for the knownmix estimation pipeline.
Numerical guards, default grid/bootstrap sizes and the logging setup used by the CLI.
"""

import logging
import os
from pathlib import Path
from typing import Optional

# Numerical guards
COND_THRESHOLD = 1e12  # Λ_n and the small OLS designs must be better conditioned than this
DENOMINATOR_GUARD = 1e-12  # scaled by max(1, |γ|∞) in the γ -> (α, β, π) map

# Functional estimation / bootstrap defaults
DEFAULT_GRID_POINTS = 100
DEFAULT_LEVEL = 0.05
DEFAULT_REPLICATES = 1000
QUANTILE_LEVELS = (0.1, 0.5, 0.9)

# Performance settings
MOMENT_CHUNK_SIZE = 65536  # reduction order is fixed by this, keep it constant across runs
BOOTSTRAP_BATCH = 50  # multiplier replicates per matrix product
INFLUENCE_ROW_CHUNK = 10  # grid rows materialized at a time
DEFAULT_THREADS = int(os.environ.get("KNOWNMIX_THREADS", min(4, os.cpu_count() or 1)))

LOG_FORMAT = "%(asctime)s - %(levelname)s - %(message)s"
LOG_LEVEL = os.environ.get("KNOWNMIX_LOG_LEVEL", "INFO").upper()


def configure_logging(log_file: Optional[Path] = None, level: str = LOG_LEVEL) -> None:
    """Configure root logging once for a CLI run (stream + optional file)."""
    handlers: list[logging.Handler] = [logging.StreamHandler()]
    if log_file is not None:
        log_file.parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))

    logging.basicConfig(
        level=getattr(logging, level, logging.INFO),
        format=LOG_FORMAT,
        handlers=handlers,
        force=True,
    )
