"""Configuration management for mvmilstein using Pydantic Settings."""

import os
from functools import lru_cache
from typing import Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Default experiment configuration.

    All settings can be configured via environment variables prefixed with
    ``MVMILSTEIN_`` (or a ``.env`` file). Config files and command-line flags
    override these values per invocation.
    """

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="MVMILSTEIN_",
        extra="ignore",
        case_sensitive=False,
    )

    # Application Settings
    app_name: str = "mvmilstein"
    log_level: Literal["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"] = "INFO"
    workers: int | None = Field(default=None, gt=0)

    # Experiment defaults
    seed: int = Field(default=20240601, ge=0, lt=2**64)
    output_format: Literal["csv", "json"] = "csv"
    horizon: float = Field(default=1.0, gt=0)
    sigma: float = Field(default=1.5, gt=0)
    coupling_c: float = 0.5
    x0: float = 1.0
    particles: int = Field(default=10_000, gt=0)
    particles_small_model: int = Field(default=1_000, gt=0)
    repetitions: int = Field(default=1, gt=0)
    levy_terms: int | None = Field(default=None, gt=0)

    # Numerics
    divergence_threshold: float = 1e150

    @field_validator("divergence_threshold")
    @classmethod
    def validate_threshold(cls, v: float) -> float:
        """Ensure the divergence threshold is a positive finite number."""
        if not (v > 0 and v < float("inf")):
            raise ValueError("divergence_threshold must be positive and finite")
        return v

    @property
    def effective_workers(self) -> int:
        """Return the worker count, defaulting to the available cores."""
        return self.workers or os.cpu_count() or 1


@lru_cache
def get_settings() -> Settings:
    """Get cached settings instance.

    Returns:
        Settings: The application settings.
    """
    return Settings()
