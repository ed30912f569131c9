from typing import Dict, List, Literal, Optional

from pydantic import BaseModel, Field, field_validator, model_validator

import settings


class DensityConfig(BaseModel):
    kernel: Literal["gaussian"] = "gaussian"
    bandwidth: Literal["plugin", "scale", "fixed"] = Field(
        "plugin", description="Bandwidth rule: two-stage plug-in, 1.06·σ·n^-1/5, or fixed"
    )
    h: Optional[float] = Field(None, description="Bandwidth used when bandwidth='fixed'")
    clamp: bool = Field(True, description="Report max(f_n, 0)")

    @model_validator(mode="after")
    def check_fixed(self) -> "DensityConfig":
        if self.bandwidth == "fixed" and (self.h is None or self.h <= 0):
            raise ValueError("fixed bandwidth requires h > 0")
        return self


class BootstrapConfig(BaseModel):
    replicates: int = Field(settings.DEFAULT_REPLICATES, ge=1, description="N")
    level: float = Field(settings.DEFAULT_LEVEL, gt=0, lt=1, description="p, band level is 1-p")
    multiplier: Literal["standard_normal"] = "standard_normal"
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(settings.DEFAULT_THREADS, ge=1)


class EstimationSettings(BaseModel):
    cond_threshold: float = Field(settings.COND_THRESHOLD, gt=1)
    use_density: bool = Field(
        True, description="Plug f_n into the influence function; else differentiate F_n"
    )
    density_at: Literal["raw", "clamped"] = "raw"


class StageTiming(BaseModel):
    stage: str
    seconds: float
    rss_mb: float


class RunManifest(BaseModel):
    command: str
    input_path: Optional[str] = None
    scenario: Optional[str] = None
    known_spec: str
    transform: List[float] = [0.0, 0.0]
    grid_points: Optional[int] = None
    bootstrap: Optional[BootstrapConfig] = None
    seed: Optional[int] = None
    outputs: List[str] = []
    timings: List[StageTiming] = []


class FitReport(BaseModel):
    n: int
    alpha: float
    beta: float
    pi: float
    std_errors: List[float]
    pi_valid: bool
    gamma: List[float]
    sigma: List[List[float]]
    lambda_family: Optional[Dict[str, Optional[float]]] = None
    sigma_star_sq: Optional[float] = None
    sigma_star_reason: Optional[str] = None


class EstimatorStats(BaseModel):
    estimator: str
    truth: float
    bias: Optional[float] = None
    sd: Optional[float] = None
    sd_sqrt_n: Optional[float] = None
    mean_se_sqrt_n: Optional[float] = None

    @field_validator("sd", "sd_sqrt_n", "mean_se_sqrt_n")
    @classmethod
    def nonnegative(cls, v: Optional[float]) -> Optional[float]:
        if v is not None and v < 0:
            raise ValueError("spread statistics must be nonnegative")
        return v


class McReport(BaseModel):
    study: Literal["bias", "se", "coverage"]
    scenario: str
    pi0: float
    n: int
    M: int = Field(..., ge=1)
    m: int = Field(0, ge=0, description="Replicates with π_n ∉ (0,1] or no fit")
    seed: int
    replicates_N: Optional[int] = None
    stats: List[EstimatorStats] = []
    miss_rate: Optional[float] = Field(None, ge=0, le=1)

    @model_validator(mode="after")
    def check_counts(self) -> "McReport":
        if self.m > self.M:
            raise ValueError("m cannot exceed M")
        return self
