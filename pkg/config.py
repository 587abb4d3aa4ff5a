"""
Transflex - Configuration Management
====================================
Centralized configuration using pydantic-settings for type safety and validation.

Model and training defaults: 100 hidden units, 300-dimensional
embeddings, AdaDelta with minibatch size 20, 300 epochs.
"""

from typing import Optional
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="TRANSFLEX_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",  # Ignore extra environment variables
    )

    # Paths
    runs_dir: str = Field(default="./runs")
    unimorph_dir: Optional[str] = Field(default=None)

    # Model
    hidden_size: int = Field(default=100, ge=1)
    embedding_size: int = Field(default=300, ge=1)
    decoder_init_range: float = Field(default=0.08, gt=0.0)
    decode_margin: int = Field(default=5, ge=0)

    # Training
    epochs: int = Field(default=300, ge=0)
    batch_size: int = Field(default=20, ge=1)
    eval_every: int = Field(default=10, ge=1)
    selection: str = Field(default="best-dev-accuracy")
    adadelta_rho: float = Field(default=0.95, gt=0.0, lt=1.0)
    adadelta_eps: float = Field(default=1e-6, gt=0.0)
    dropout: float = Field(default=0.0, ge=0.0, lt=1.0)
    clip_norm: Optional[float] = Field(default=None)

    # Datasets
    n_s: int = Field(default=12000, ge=0)
    dev_size: int = Field(default=1600, ge=1)
    test_size: int = Field(default=10000, ge=1)

    # Decoding / evaluation
    beam_width: int = Field(default=1, ge=1)
    workers: int = Field(default=1, ge=1)

    # Logging
    log_level: str = Field(default="INFO")


@lru_cache()
def get_settings() -> Settings:
    """Get cached settings instance."""
    return Settings()


# Convenience function for quick access
settings = get_settings()
