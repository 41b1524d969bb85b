"""Request/response models for the HTTP service.

ScenarioConfig (harness.config) is itself the /scenario request body; the
models here cover the remaining endpoints and the response shapes.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from ..harness.config import NoiseConfig


class HealthResponse(BaseModel):
    status: str
    version: str


class TrialRow(BaseModel):
    trial: int
    accepted: bool
    error_metric: float
    dwell_us: float
    lost: bool
    seed: int


class MetricsSummary(BaseModel):
    protocol: str
    adversary: str
    trials: int
    accepts: int
    lost_trials: int
    accept_rate: float
    honest_accept_rate: Optional[float]
    adversary_accept_rate: Optional[float]


class ScenarioResponse(BaseModel):
    summary: MetricsSummary
    per_trial: list[TrialRow]


class DephasingCurveRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t2_us: float = Field(108.6, gt=0)
    t_max_us: float = Field(50.0, gt=0)
    points: int = Field(11, ge=2)
    shots: int = Field(100_000, ge=1)
    seed: int = Field(0, ge=0)


class DephasingCurvePoint(BaseModel):
    t_us: float
    flip_rate: float
    analytic_p: float


class DephasingCurveResponse(BaseModel):
    t2_us: float
    points: list[DephasingCurvePoint]


class UupufEstimateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: int = Field(2, alias="lambda", ge=1, le=12)
    estimator: Literal["robustness", "collision", "uniqueness"] = "collision"
    delta: float = Field(0.9, ge=0, le=1)
    epsilon_grid: list[float] = Field(default_factory=lambda: [0.0])
    trials: int = Field(1000, ge=1)
    seed: int = Field(0, ge=0)


class EstimateRow(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: int = Field(alias="lambda")
    epsilon: float
    delta: float
    trials: int
    rate: float
    seed: int


class UupufEstimateResponse(BaseModel):
    estimator: str
    rows: list[EstimateRow]


class QrpufEnrollRequest(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: int = Field(4, alias="lambda", ge=1, le=12)
    crt_size: int = Field(8, ge=1)
    quant_bits: int = Field(8, ge=1, le=16)
    mode: Literal["analytic", "tomography"] = "analytic"
    tomography_shots: int = Field(90_000, ge=3)
    seed: int = Field(0, ge=0)


class CrtEntryModel(BaseModel):
    index: int
    angles: list[list[float]]
    w: str
    o: str
    y: str


class CrtModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: int = Field(alias="lambda")
    n: int
    b: int
    mode: str
    entries: list[CrtEntryModel]


class PufModel(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    lam: int = Field(alias="lambda")
    # lam gates, each 2x2, each entry [re, im]
    gates: list[list[list[list[float]]]]


class QrpufEnrollResponse(BaseModel):
    crt: CrtModel
    puf: PufModel


class QrpufVerifyRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    crt: CrtModel
    puf: Optional[PufModel] = None  # required for honest/emulation responders
    responder: Literal["honest", "identity", "emulation", "random_guess"] = "honest"
    entry_index: int = 0
    hamming_threshold: int = Field(0, ge=0)
    shots_per_qubit: int = Field(5, ge=1)
    seed: int = Field(0, ge=0)


class QrpufVerifyResponse(BaseModel):
    accept: bool
    observed_o: str
    hamming_weight: int
    error: Optional[str] = None


class Hmp4RunRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")

    trials: int = Field(100, ge=1)
    t: int = Field(12, ge=3)
    error_tolerance: int = Field(0, ge=0)
    registers: Optional[int] = Field(None, ge=1)
    control_registers: int = Field(0, ge=0)
    adversary: Literal["none", "random_guess", "token_clone"] = "none"
    memory_dwell_us: float = Field(0.0, ge=0)
    noise: Optional[NoiseConfig] = None
    seed: int = Field(0, ge=0)
