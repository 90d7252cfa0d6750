"""
Application configuration management.

This module handles all configuration loading from environment variables,
provides validation, and sets up proper defaults for different environments.
Numerical tolerances shared by every service live here so that a run can be
tuned without touching the run-config file.
"""

from functools import lru_cache

from pydantic import field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    # Application
    app_name: str = "Compound Poisson Lab"
    app_version: str = "1.0.0"
    environment: str = "development"
    debug: bool = False

    # Logging
    log_level: str = "INFO"
    log_dir: str = "logs"
    log_to_file: bool = True

    # Quadrature
    quadrature_rtol: float = 1e-8
    quadrature_atol: float = 1e-12
    quadrature_limit: int = 200  # Subintervals per axis for QUADPACK

    # Flows
    flow_max_step: float = 0.01  # Fixed RK4 substep bound
    fd_step: float = 1e-5  # Central-difference step for flow_fd derivatives

    # Sampling
    envelope_probes: int = 10_000  # Quasi-random probes validating sup(rho)
    envelope_margin: float = 1.05  # Safety factor when the envelope is estimated
    chunk_size: int = 20_000  # Replicas drawn from one random stream
    workers: int = 1  # Thread pool width for chunked replication

    # Verification
    z_max: float = 3.0
    min_replicas: int = 100

    # Dynamics
    max_dt: float = 0.01  # Euler-Maruyama step guard
    inconclusive_ratio: float = 0.5  # stderr / |estimate| above this is inconclusive

    @field_validator("environment")
    @classmethod
    def validate_environment(cls, v):
        """Validate environment setting."""
        valid_envs = ["development", "testing", "staging", "production"]
        if v.lower() not in valid_envs:
            raise ValueError(f"Environment must be one of: {valid_envs}")
        return v.lower()

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v):
        """Normalize the log level name."""
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Log level must be one of: {valid_levels}")
        return v.upper()

    @field_validator("chunk_size", "workers", "envelope_probes", "quadrature_limit")
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError("must be a positive integer")
        return v

    @property
    def is_production(self) -> bool:
        """Check if running in production."""
        return self.environment == "production"

    model_config = {
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }


@lru_cache
def get_settings() -> Settings:
    """
    Get cached application settings.

    Returns:
        Settings: Application configuration object
    """
    return Settings()


# Export commonly used settings
settings = get_settings()
