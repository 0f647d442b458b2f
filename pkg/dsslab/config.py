import os
from typing import Literal

from pydantic_settings import SettingsConfigDict, BaseSettings


class Settings(BaseSettings):

    LOG_LEVEL: str = "INFO"
    OUTPUT_DIR: str = "runs"

    GRID_M: int = 200
    COMPAT_TOL: float = 1e-9
    BLOWUP_THRESHOLD: float = 1e12

    MONITOR_C_TOL: float = 10.0
    SNAPSHOT_STRIDE: float = 0.1
    ULTIMATE_WINDOW: float = 0.2

    SEARCH_BUDGET: int = 100_000
    SEARCH_WORKERS: int = 1

    # какой из β стоит в перекрёстном слагаемом χ
    CHI_BETA: Literal["beta1", "beta2", "beta3"] = "beta2"
    OMEGA_CROSS_BLOCK: Literal["printed", "transposed"] = "printed"

    model_config = SettingsConfigDict(
        env_prefix="DSS_",
        env_file=os.path.join(os.path.dirname(__file__), "..", ".env"),
        extra="ignore",
    )


settings = Settings()
