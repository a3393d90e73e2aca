"""
Configuration settings for QuatTrack

Handles environment variables and application settings.
"""

from pydantic_settings import BaseSettings
from typing import Optional


class Settings(BaseSettings):
    # Application settings
    APP_NAME: str = "QuatTrack"
    VERSION: str = "0.1.0"
    DEBUG: bool = False

    # Simulation defaults
    DEFAULT_DT: float = 1e-3
    DEFAULT_T_END: float = 40.0
    DEFAULT_RECORD_STRIDE: int = 10
    DEFAULT_ALPHA: float = 1.0

    # Sweep parallelism; None means one worker per CPU
    QUATTRACK_THREADS: Optional[int] = None

    # Output settings
    DEFAULT_OUTPUT_DIR: str = "./output"
    CSV_FLOAT_FORMAT: str = "%.12e"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

    class Config:
        env_file = ".env"
        case_sensitive = True


# Global settings instance
settings = Settings()
