"""Declarative scenario descriptions (validated pydantic models).

A ScenarioConfig fully determines an experiment: protocol, per-protocol
parameters, channel conditions, adversary strategy, trial count and seed.
The same models double as the request schema of the HTTP service.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..quantum_core import (
    DEFAULT_IDLE_DEPOLARIZE_PROB,
    DEFAULT_READOUT_FLIP_PROB,
    DEFAULT_T2_US,
    NoiseParams,
)

Protocol = Literal["qrpuf", "uupuf", "hmp4"]
Adversary = Literal["none", "emulation", "intercept_resend", "random_guess",
                    "token_clone"]

# Which strategies make sense against which protocol.
COMPATIBLE_ADVERSARIES = {
    "qrpuf": {"none", "emulation", "intercept_resend", "random_guess"},
    "uupuf": {"none", "intercept_resend", "random_guess"},
    "hmp4": {"none", "random_guess", "token_clone"},
}


class NoiseConfig(BaseModel):
    """Device noise; defaults match the calibrated hardware averages."""

    model_config = ConfigDict(extra="forbid")

    t2_us: float = Field(DEFAULT_T2_US, gt=0)
    readout_flip_prob: float = Field(DEFAULT_READOUT_FLIP_PROB, ge=0, le=1)
    idle_depolarize_prob: float = Field(DEFAULT_IDLE_DEPOLARIZE_PROB, ge=0, le=1)

    def to_params(self) -> NoiseParams:
        return NoiseParams(t2_us=self.t2_us,
                           readout_flip_prob=self.readout_flip_prob,
                           idle_depolarize_prob=self.idle_depolarize_prob)


class ChannelConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    latency_us: float = Field(0.0, ge=0)
    loss_prob: float = Field(0.0, ge=0, le=1)
    noise: Optional[NoiseConfig] = None  # None = ideal channel


class QrPufConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: int = Field(4, alias="lambda", ge=1, le=12)
    crt_size: int = Field(8, ge=1)
    challenges_per_session: int = Field(2, ge=1)
    quant_bits: int = Field(8, ge=1, le=16)
    shots_per_qubit: int = Field(5, ge=1)
    # None resolves to 0 on an ideal channel, ceil(0.1 * lambda) otherwise.
    hamming_threshold: Optional[int] = Field(None, ge=0)
    enroll_mode: Literal["analytic", "tomography"] = "analytic"
    tomography_shots: int = Field(90000, ge=3)


class UuPufConfig(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: int = Field(3, alias="lambda", ge=1, le=12)
    k1: int = Field(50, ge=1)
    k2: int = Field(50, ge=1)
    tau: float = Field(0.9, ge=0, le=1)
    crt_entries: int = Field(1, ge=1)
    memory_dwell_us: float = Field(0.0, ge=0)  # dephasing of stored references


class Hmp4Config(BaseModel):
    model_config = ConfigDict(extra="forbid")

    t: int = Field(12, ge=3)
    error_tolerance: int = Field(0, ge=0)
    registers: Optional[int] = Field(None, ge=1)  # None -> t eligible registers
    control_registers: int = Field(0, ge=0)
    memory_dwell_us: float = Field(0.0, ge=0)

    @model_validator(mode="after")
    def _check(self):
        if self.t % 3 != 0:
            raise ValueError("t must be a multiple of 3")
        return self

    def total_registers(self) -> int:
        base = self.registers if self.registers is not None else self.t
        return base + self.control_registers


class ScenarioConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    protocol: Protocol
    trials: int = Field(100, ge=1)
    seed: int = Field(0, ge=0)
    adversary: Adversary = "none"
    channel: ChannelConfig = ChannelConfig()
    qrpuf: QrPufConfig = QrPufConfig()
    uupuf: UuPufConfig = UuPufConfig()
    hmp4: Hmp4Config = Hmp4Config()

    @model_validator(mode="after")
    def _check(self):
        if self.adversary not in COMPATIBLE_ADVERSARIES[self.protocol]:
            raise ValueError(
                f"adversary {self.adversary!r} is not defined for protocol "
                f"{self.protocol!r}")
        if self.protocol == "hmp4":
            eligible = (self.hmp4.registers if self.hmp4.registers is not None
                        else self.hmp4.t)
            if eligible < self.hmp4.t:
                raise ValueError("hmp4 needs at least t validation-eligible registers")
        return self

    def resolved_hamming_threshold(self) -> int:
        if self.qrpuf.hamming_threshold is not None:
            return self.qrpuf.hamming_threshold
        if self.channel.noise is None:
            return 0
        return math.ceil(0.1 * self.qrpuf.lam)


def load_scenario_config(path: str | Path) -> ScenarioConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return ScenarioConfig.model_validate(json.load(fh))
