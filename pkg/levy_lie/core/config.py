from typing import List
from pydantic_settings import BaseSettings
from pydantic import Field, field_validator
import json


class Settings(BaseSettings):
    # Application Settings
    app_name: str = Field(default="levy-lie", alias="APP_NAME")
    app_version: str = Field(default="1.0.0", alias="APP_VERSION")
    ENVIRONMENT: str = Field(default="development", alias="ENVIRONMENT")

    # Logging Configuration
    LOG_LEVEL: str = Field(default="INFO", alias="LOG_LEVEL")
    log_format: str = Field(default="%(asctime)s - %(name)s - %(levelname)s - %(message)s", alias="LOG_FORMAT")

    # Output
    output_dir: str = Field(default="./runs", alias="OUTPUT_DIR")

    # Simulation
    default_seed: int = Field(default=20240601, alias="DEFAULT_SEED")
    sim_workers: int = Field(default=4, alias="SIM_WORKERS")
    renormalize_every: int = Field(default=64, alias="RENORMALIZE_EVERY")
    default_steps_per_unit: int = Field(default=1000, alias="DEFAULT_STEPS_PER_UNIT")

    # Group numerics
    chart_check_points: int = Field(default=64, alias="CHART_CHECK_POINTS")
    picard_tolerance: float = Field(default=1e-12, alias="PICARD_TOLERANCE")
    picard_max_iterations: int = Field(default=50, alias="PICARD_MAX_ITERATIONS")
    membership_tolerance: float = Field(default=1e-9, alias="MEMBERSHIP_TOLERANCE")

    # Quadrature
    k_quadrature_nodes: int = Field(default=256, alias="K_QUADRATURE_NODES")
    law_quadrature_nodes: int = Field(default=3, alias="LAW_QUADRATURE_NODES")

    # Estimation
    detection_threshold: float = Field(default=0.05, alias="DETECTION_THRESHOLD")
    estimator_meshes: List[float] = Field(default=[1e-2, 5e-3, 2.5e-3], alias="ESTIMATOR_MESHES")
    ball_fractions: List[float] = Field(default=[0.5, 0.35, 0.25], alias="BALL_FRACTIONS")
    jump_floor_factor: float = Field(default=4.0, alias="JUMP_FLOOR_FACTOR")
    max_law_support: int = Field(default=400, alias="MAX_LAW_SUPPORT")
    levy_windows: int = Field(default=4, alias="LEVY_WINDOWS")
    modulus_windows: List[float] = Field(default=[0.2, 0.1, 0.05, 0.02], alias="MODULUS_WINDOWS")

    # Verification
    z_threshold: float = Field(default=4.0, alias="Z_THRESHOLD")
    pass_rate: float = Field(default=0.95, alias="PASS_RATE")
    min_verify_paths: int = Field(default=1000, alias="MIN_VERIFY_PATHS")
    derivative_check_step: float = Field(default=1e-5, alias="DERIVATIVE_CHECK_STEP")

    @field_validator('estimator_meshes', 'ball_fractions', 'modulus_windows', mode='before')
    @classmethod
    def parse_float_list(cls, v):
        if isinstance(v, str):
            try:
                return json.loads(v)
            except json.JSONDecodeError:
                return [float(item) for item in v.split(',') if item.strip()]
        return v

    @field_validator('estimator_meshes')
    @classmethod
    def meshes_decreasing(cls, v):
        if any(b >= a for a, b in zip(v, v[1:])):
            raise ValueError("estimator meshes must be strictly decreasing")
        return v

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False
        populate_by_name = True


# Global settings instance
settings = Settings()
