"""
Simulator configuration settings
"""
from typing import Optional

from pydantic_settings import BaseSettings, SettingsConfigDict

from src.models.serving import SchedulingPolicy, TraceMix


class Settings(BaseSettings):
    """Simulator settings, overridable through SGS_* environment variables or .env"""

    # Output
    OUTPUT_DIR: str = "out"
    LOG_LEVEL: str = "INFO"

    # Randomness
    SEED: int = 0

    # Candidate set / latency table
    MAX_COLUMNS: int = 100
    FILL_FRACTION: float = 0.5
    GRID_SAMPLES: int = 1000

    # Scheduler
    POLICY: SchedulingPolicy = SchedulingPolicy.STRICT_ACCURACY
    WINDOW: Optional[int] = 10
    INITIAL_CACHE: Optional[int] = None

    # Workload
    TRACE_LENGTH: int = 1000
    TRACE_MIX: TraceMix = TraceMix.UNIFORM
    ACCURACY_MARGIN: float = 0.01

    # Design space exploration
    DSE_WORKERS: int = 1

    model_config = SettingsConfigDict(
        env_prefix="SGS_",
        env_file=".env",
        case_sensitive=True,
        extra="ignore",
    )


settings = Settings()
