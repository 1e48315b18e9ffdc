"""Application configuration."""

from pathlib import Path
from typing import Optional

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

PROJECT_ROOT = Path(__file__).resolve().parents[2]


class Settings(BaseSettings):
    """Process-level settings, read from the environment (prefix ``SELFHDR_``) or ``.env``."""

    model_config = SettingsConfigDict(
        env_file=".env", env_prefix="SELFHDR_", extra="ignore"
    )

    APP_NAME: str = Field(default="selfhdr", description="Name used in log records")

    # Runtime settings
    DEVICE: str = Field(default="cpu", description="torch device for training and inference")
    NUM_THREADS: Optional[int] = Field(
        default=None, ge=1, le=256, description="torch intra-op threads (None = torch default)"
    )
    DETERMINISTIC: bool = Field(
        default=True, description="Request deterministic torch kernels"
    )

    # Perceptual loss settings
    ALLOW_PRETRAINED_WEIGHTS: bool = Field(
        default=False,
        description="Allow the perceptual extractor to load downloaded ImageNet weights",
    )

    # Experiment configuration used when a command gets no --config
    DEFAULT_CONFIG: Path = Field(
        default=PROJECT_ROOT / "configs" / "desk.json",
        description="Pipeline JSON configuration used by default",
    )

    # Environment
    ENVIRONMENT: str = Field(default="development")
    LOG_LEVEL: str = Field(default="INFO")
    LOG_JSON: bool = Field(default=True, description="Emit JSON log lines on stderr")


settings = Settings()
