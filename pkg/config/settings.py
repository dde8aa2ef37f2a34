from pathlib import Path
from pydantic import BaseSettings, validator


BASE_DIR = Path(__file__).resolve().parent.parent


class Settings(BaseSettings):
    # Base
    PROJECT_NAME: str = "Universal Series Builder"
    VERSION: str = "1.0.0"

    # Logging
    LOG_LEVEL: str = "INFO"
    LOG_DIR: Path = BASE_DIR / "logs"
    LOG_FILE: str = "universal_series.log"

    # Sampling
    MIN_BOUNDARY_SAMPLES: int = 8
    MAX_GRID_POINTS: int = 1_000_000
    SUP_REFINE_RTOL: float = 1e-3
    SUP_REFINE_MAX_DOUBLINGS: int = 6
    BOUNDARY_TOLERANCE: float = 1e-12

    # Polynomial approximation
    INITIAL_DEGREE: int = 4
    DEGREE_GROWTH: float = 1.5
    BASIS_BUDGET: int = 10_000
    SAMPLES_PER_DEGREE: int = 4
    MIN_SAMPLES_PER_FACTOR: int = 32
    CERTIFY_MULTIPLIER: int = 3
    RANK_TOLERANCE: float = 1e-13
    REORTHOGONALIZE_RATIO: float = 0.1
    CONDITION_THRESHOLD: float = 1e-8
    PRUNE_FRACTION: float = 1e-3
    COLLAPSE_RATIO: float = 1e3
    STALL_ROUNDS: int = 2

    # Construction
    INNER_TOL_SAFETY: float = 2.0
    DIAGONAL_FLOOR: float = 1e-9
    PADDING_TOLERANCE: float = 1e-12

    # Verification
    VERIFY_DENSITY_MULTIPLIER: int = 2
    VERIFY_TOLERANCE_FACTOR: float = 1.5

    @validator("LOG_LEVEL")
    def validate_log_level(cls, v: str) -> str:
        level = v.upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level

    @validator("DEGREE_GROWTH")
    def validate_growth(cls, v: float) -> float:
        if v <= 1.0:
            raise ValueError("DEGREE_GROWTH must be greater than 1")
        return v

    @validator(
        "MIN_BOUNDARY_SAMPLES", "MAX_GRID_POINTS", "INITIAL_DEGREE", "BASIS_BUDGET",
        "SAMPLES_PER_DEGREE", "MIN_SAMPLES_PER_FACTOR", "CERTIFY_MULTIPLIER",
        "VERIFY_DENSITY_MULTIPLIER", "STALL_ROUNDS", "COLLAPSE_RATIO"
    )
    def validate_positive(cls, v: int) -> int:
        if v <= 0:
            raise ValueError("Numeric settings must be positive")
        return v

    class Config:
        case_sensitive = True
        env_file = ".env"
        env_file_encoding = "utf-8"


settings = Settings()
