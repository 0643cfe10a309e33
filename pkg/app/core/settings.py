# app/core/settings.py
# Centralize configuration in one place: the environment-driven bits go through
# pydantic-settings, the numerical defaults are a frozen model read by every service.
from __future__ import annotations
from pathlib import Path
from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field
from pydantic_settings import BaseSettings, SettingsConfigDict
from dotenv import load_dotenv

ROOT = Path(__file__).resolve().parents[2]  # project root: app/core -> app -> ROOT


def _load_env_files() -> None:
    """
    Load `.env` from the project root, falling back to `.env.txt`.
    Real environment variables always win (override=False).
    """
    for p in (ROOT / ".env", ROOT / ".env.txt"):
        if p.exists():
            load_dotenv(dotenv_path=p, override=False)
            break


try:
    _load_env_files()
except OSError:
    # Unreadable env file; fall through to process environment only.
    pass


class NumericDefaults(BaseModel):
    """Tolerances and budgets shared by the numerical services."""

    model_config = ConfigDict(frozen=True)

    # ---- Operators ----
    HERMITICITY_TOL: float = 1e-12
    SUPPORT_TOL_REL: float = Field(1e-9, description="support clipping, relative to max |eigenvalue|")
    STATE_TOL: float = 1e-10
    SUPPORT_DOMINATION_TOL: float = 1e-8

    # ---- Exclusion solver ----
    GAP_TOL: float = 1e-7
    ITERATION_BUDGET: int = 10_000
    DIMENSION_CAP: int = 64
    ERROR_FLOOR: float = 1e-14
    SDP_SOLVER: str = "CLARABEL"

    # ---- Radii ----
    EPS_SCHEDULE: Tuple[float, ...] = (1e-4, 1e-6, 1e-8)
    DIVERGENCE_THRESHOLD: float = 1e3
    DIVERGENCE_GROWTH_TOL: float = 1e-3
    DIVERGENCE_GROWTH_RATIO: float = 0.9
    SIMPLEX_TOL: float = 1e-10
    SIMPLEX_MAX_ITER: int = 5000
    RADIUS_TOL: float = 1e-9
    SUBGRADIENT_ITER: int = 200
    ACTIVE_SET_TOL: float = 1e-8
    RADIUS_GAP_TOL: float = Field(1e-6, description="two-sided gap above which a radius solve is flagged stalled")
    STATIONARITY_TOL: float = 1e-4
    CHANNEL_SUBGRADIENT_ITER: int = 40
    CHANNEL_RESTARTS: int = 3
    SMOOTHING_SCHEDULE: Tuple[float, ...] = (1e-3, 1e-5)
    DYKSTRA_ITER: int = 500


class Settings(BaseSettings):
    # Optional output directory for verification reports; the only env-driven setting.
    REPORT_DIR: Optional[Path] = Field(None, description="Directory where `verify` writes its report")

    ROOT: Path = ROOT
    SAMPLES: Path = Field(default=ROOT / "samples")

    model_config = SettingsConfigDict(
        case_sensitive=True,
        extra="ignore",
    )


# Instantiate once and reuse
settings = Settings()
DEFAULTS = NumericDefaults()
