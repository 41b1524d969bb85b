"""Adversary strategies.

emulation        -- responder applying an exact copy of the QR-PUF unitary
                    (only meaningful when the scenario grants unitary
                    knowledge, i.e. against the QR-PUF model).
intercept_resend -- on-path eavesdropper measuring each transiting qubit in
                    a random Z or X basis and forwarding the collapsed state.
random_guess     -- responder/holder with no device: replies with fresh
                    Haar-random states of the right dimension.
token_clone      -- hidden-matching holder that measured every register at
                    issue time in a random matching and answers later
                    validations from the classical record.
"""

from __future__ import annotations

from ..hmp4 import HolderToken, ValidationChallenge, ValidationReply, measure_hmp4
from ..quantum_core import (
    HADAMARD,
    DensityMatrix,
    UnitaryOp,
    haar_state,
    measure_qubit,
    measure_qubit_density,
)
from ..rng import RngStream

_H_BASIS = UnitaryOp(HADAMARD)


def intercept_resend_state(state, rng: RngStream):
    """Measure every qubit in a uniformly random basis from {Z, X} and pass
    on the collapsed register."""
    out = state
    for k in range(state.num_qubits):
        sub = rng.substream(k)
        basis = _H_BASIS if sub.generator.random() < 0.5 else None
        if isinstance(out, DensityMatrix):
            _, out = measure_qubit_density(out, k, basis, sub.substream(1))
        else:
            _, out = measure_qubit(out, k, basis, sub.substream(1))
    return out


def random_state_responder(dim: int, rng: RngStream):
    """Returns a callable producing a fresh Haar-random state per query."""
    calls = [0]

    def responder(_challenge):
        calls[0] += 1
        return haar_state(dim, rng.substream(calls[0]))

    return responder


class RandomGuessHolder:
    """Hidden-matching holder without the token: measures fresh Haar-random
    2-qubit states instead of the issued registers."""

    def __init__(self, rng: RngStream):
        self.rng = rng
        self._calls = 0

    def __call__(self, challenge: ValidationChallenge) -> ValidationReply:
        self._calls += 1
        rng = self.rng.substream(self._calls)
        size = 2 * len(challenge.indices) // 3
        chosen = tuple(sorted(rng.generator.choice(
            challenge.indices, size=size, replace=False).tolist()))
        answers = {}
        for j, idx in enumerate(chosen):
            sub = rng.substream(j)
            fake = haar_state(4, sub.substream(0))
            answers[idx] = measure_hmp4(fake, challenge.bases[idx], sub.substream(1))
        return ValidationReply(chosen=chosen, answers=answers)


class TokenCloneHolder:
    """Measures the whole token at issue time (one random matching per
    register), keeps only the classical record, and replays it."""

    def __init__(self, token: HolderToken, rng: RngStream):
        self.rng = rng
        self.record = {}
        for idx, reg in enumerate(token.registers):
            sub = rng.substream(idx)
            m = int(sub.generator.integers(0, 2))
            a, b = measure_hmp4(reg.state, m, sub.substream(1))
            reg.used = True  # state destroyed by the clone's measurement
            self.record[idx] = (m, a, b)
        self._calls = 0

    def __call__(self, challenge: ValidationChallenge) -> ValidationReply:
        self._calls += 1
        rng = self.rng.substream(0x10000 + self._calls)
        size = 2 * len(challenge.indices) // 3
        chosen = tuple(sorted(rng.generator.choice(
            challenge.indices, size=size, replace=False).tolist()))
        answers = {}
        for idx in chosen:
            _, a, b = self.record[idx]
            answers[idx] = (a, b)
        return ValidationReply(chosen=chosen, answers=answers)
