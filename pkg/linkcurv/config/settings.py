"""linkcurv settings."""

import os
from functools import lru_cache

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

_env = os.getenv("ENV", "local")
_env_file = f".env.{_env}"


class QuadSettings(BaseModel):
    """Composite Gauss-Legendre quadrature settings."""

    base_points_per_axis: int = Field(default=16, ge=4)
    max_refinements: int = Field(default=6, ge=1, le=12)
    rel_tol: float = Field(default=1e-3, gt=0)
    abs_tol: float = Field(default=1e-9, gt=0)
    panel_order: int = Field(default=6, ge=2, le=20)
    # nodes per unit of kappa * parametric speed
    points_per_kappa: float = Field(default=2.0, gt=0)
    screen_exponent: float = Field(default=40.0, gt=0)
    max_tensor_points: int = Field(default=100_000_000, ge=1)
    qmc_log2_points: int = Field(default=16, ge=4, le=30)
    qmc_replicas: int = Field(default=8, ge=2)
    seed: int | None = None
    chunk_size: int = Field(default=1 << 18, ge=1024)


class InvariantSettings(BaseModel):
    """Root finding settings for piercings and crossings."""

    root_tol: float = Field(default=1e-10, gt=0)
    scan_n: int = Field(default=256, ge=64)
    newton_max_iter: int = Field(default=50, ge=1)
    newton_damping: float = Field(default=0.5, gt=0, lt=1)


class TimelikeSettings(BaseModel):
    """Grid check for time-like hyperlinks."""

    grid_n: int = Field(default=512, ge=64)
    tol: float = Field(default=1e-9, gt=0)


class Settings(BaseSettings):
    """Application settings from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="LINKCURV_",
        env_file=_env_file,
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
        env_nested_delimiter="__",
    )

    LOG_LEVEL: str = "INFO"
    KAPPA_SCHEDULE: list[float] = [5.0, 10.0, 20.0, 40.0, 80.0]
    # the Wilson exponent saturates slowly when crossings are close in time
    SK_SCHEDULE: list[float] = [20.0, 40.0, 80.0, 160.0, 320.0]
    MAX_WORKERS: int = Field(default=1, ge=1)
    OUTPUT_DIR: str = "out"

    # Nested
    QUADRATURE: QuadSettings = QuadSettings()
    INVARIANTS: InvariantSettings = InvariantSettings()
    TIMELIKE: TimelikeSettings = TimelikeSettings()

    @field_validator("KAPPA_SCHEDULE", "SK_SCHEDULE")
    @classmethod
    def schedule_increasing(cls, v: list[float]) -> list[float]:
        if any(b <= a for a, b in zip(v, v[1:])) or any(k <= 0 for k in v):
            raise ValueError("KAPPA_SCHEDULE must be positive and strictly increasing")
        return v


@lru_cache
def get_settings() -> Settings:
    return Settings()


settings = get_settings()
