"""
Application configuration settings using Pydantic.
"""

import os

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings class."""

    PROJECT_NAME: str = "spin-evolution-factorization"
    PROJECT_DESCRIPTION: str = (
        "Factorization U = A·D·N of spin time evolution in a time-varying magnetic field"
    )
    VERSION: str = "1.0.0"
    DEBUG: bool = os.getenv("DEBUG", "false").lower() == "true"

    # Representations
    SPIN_DIM_CAP: int = 64

    # Paths on the sphere
    STATIONARY_SPEED_EPS: float = 1e-12
    CLOSED_PATH_TOLERANCE: float = 1e-6
    TABULATED_NORM_TOLERANCE: float = 1e-6
    TABULATED_MIN_SAMPLES: int = 5
    SOLID_ANGLE_SAMPLES: int = 4096
    POLE_CLEARANCE: float = 1e-6

    # Propagation
    DEFAULT_STEPS: int = 4096
    DEFAULT_STEPPER: str = "exp-midpoint"
    MIDPOINT_TOLERANCE: float = 1e-6
    MAGNUS4_TOLERANCE: float = 1e-9
    UNITARITY_TOLERANCE: float = 1e-10

    # Runner
    OUTPUT_DIR: str = os.getenv("OUTPUT_DIR", "results")
    JOBS: int = 1
    LOG_LEVEL: str = os.getenv("LOG_LEVEL", "INFO")
    LOG_FILE: str = "run.log"
    FLOAT_FORMAT: str = "%.16e"

    @field_validator("DEFAULT_STEPPER")
    def check_stepper(cls, v: str) -> str:
        """Accept only the steppers the propagator implements."""
        v = v.strip().lower()
        if v not in ("exp-midpoint", "magnus4"):
            raise ValueError(f"DEFAULT_STEPPER must be exp-midpoint or magnus4, got {v}")
        return v

    @field_validator("LOG_LEVEL")
    def normalize_log_level(cls, v: str) -> str:
        """Upper-case the level name so logging accepts it."""
        return v.strip().upper()

    def default_tolerance(self, stepper: str) -> float:
        """Residual tolerance used when a scenario does not set one."""
        if stepper == "magnus4":
            return self.MAGNUS4_TOLERANCE
        return self.MIDPOINT_TOLERANCE

    model_config = SettingsConfigDict(env_file=".env", case_sensitive=True)


settings = Settings()
