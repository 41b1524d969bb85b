"""Quantum channel model: loss, transit dephasing, idle depolarization.

Classical messages are lossless and authenticated; only quantum payloads go
through ``transmit_quantum``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from ..quantum_core import (
    DensityMatrix,
    NoiseParams,
    StateVector,
    dephase_all_qubits,
    depolarize_each_qubit,
)
from ..rng import RngStream

State = Union[StateVector, DensityMatrix]


@dataclass(frozen=True)
class QuantumChannel:
    latency_us: float = 0.0
    loss_prob: float = 0.0
    noise: NoiseParams | None = None

    def __post_init__(self):
        if self.latency_us < 0:
            raise ValueError("latency must be non-negative")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ValueError("loss probability must be in [0, 1]")


@dataclass(frozen=True)
class Delivered:
    state: State
    latency_us: float


@dataclass(frozen=True)
class Lost:
    latency_us: float


def transmit_quantum(ch: QuantumChannel, state: State,
                     rng: RngStream) -> Delivered | Lost:
    """Send a state through the channel.

    With probability loss_prob the message vanishes. Otherwise every qubit
    dephases over the channel latency and suffers the configured idle
    depolarization once; a noiseless channel returns the state unchanged.
    """
    if rng.generator.random() < ch.loss_prob:
        return Lost(latency_us=ch.latency_us)
    out = state
    if ch.noise is not None:
        out = dephase_all_qubits(out, ch.latency_us, ch.noise.t2_us)
        out = depolarize_each_qubit(out, ch.noise.idle_depolarize_prob)
    return Delivered(state=out, latency_us=ch.latency_us)
