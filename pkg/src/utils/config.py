"""
Configuration management for the rieszlab laboratory
"""

import os
import logging
from typing import Optional
from dotenv import load_dotenv

logger = logging.getLogger(__name__)


class Config:
    """Configuration class for managing numerical and service settings"""

    def __init__(self):
        load_dotenv()

        # Numerical configuration
        self.threads = self._int_env("RIESZLAB_THREADS", 1)
        self.tol = self._float_env("RIESZLAB_TOL", 1e-6)
        self.seed = self._int_env("RIESZLAB_SEED", 0)
        self.order = self._int_env("RIESZLAB_ORDER", 12)
        self.max_panels = self._int_env("RIESZLAB_MAX_PANELS", 200000)

        # Output configuration
        self.output_dir = os.getenv("RIESZLAB_OUTPUT_DIR", "reports")

        # Service configuration
        self.host = os.getenv("RIESZLAB_HOST", "0.0.0.0")
        self.port = self._int_env("RIESZLAB_PORT", 8000)

        # Application configuration
        self.debug = os.getenv("DEBUG", "False").lower() == "true"
        self.log_level = os.getenv("RIESZLAB_LOG_LEVEL", "INFO").upper()

    @staticmethod
    def _int_env(name: str, default: int) -> int:
        raw = os.getenv(name)
        if raw is None or raw == "":
            return default
        try:
            return int(raw)
        except ValueError:
            logger.warning(f"Ignoring non-integer {name}={raw!r}, using {default}")
            return default

    @staticmethod
    def _float_env(name: str, default: float) -> float:
        raw = os.getenv(name)
        if raw is None or raw == "":
            return default
        try:
            return float(raw)
        except ValueError:
            logger.warning(f"Ignoring non-numeric {name}={raw!r}, using {default}")
            return default

    def worker_count(self, requested: Optional[int] = None) -> int:
        """Number of quadrature workers, capped by RIESZLAB_THREADS"""
        cap = max(1, self.threads)
        if requested is None:
            return cap
        return max(1, min(requested, cap))

    def validate_config(self) -> bool:
        """Validate that the numerical settings are usable"""
        problems = []
        if self.threads < 1:
            problems.append(f"RIESZLAB_THREADS must be >= 1 (got {self.threads})")
        if not (0.0 < self.tol < 1.0):
            problems.append(f"RIESZLAB_TOL must lie in (0, 1) (got {self.tol})")
        if self.order < 1:
            problems.append(f"RIESZLAB_ORDER must be >= 1 (got {self.order})")
        if self.max_panels < 8:
            problems.append(f"RIESZLAB_MAX_PANELS must be >= 8 (got {self.max_panels})")
        if self.log_level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            problems.append(f"RIESZLAB_LOG_LEVEL is not a logging level (got {self.log_level})")

        if problems:
            for problem in problems:
                logger.error(f"Invalid configuration: {problem}")
            return False

        return True
