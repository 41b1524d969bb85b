"""Hidden-matching multi-factor token scheme on 2-qubit registers.

Issuing encodes a random 4-bit string x into the state
(1/2) * sum_i (-1)^{x_i} |i>; the server keeps x, the holder only the state.
Validation opens a random subset of registers: for each one the server
announces a matching m (a pairing of the four basis indices), the holder
measures in that matching's basis and replies (a, b), and the server checks
the parity relation

    b == x1 ^ x_{2+m}   if a == 0
    b == x_{3-m} ^ x4   if a == 1

with 1-based indices. The pairings ((1,2),(3,4)) for m=0 and ((1,3),(2,4))
for m=1 are the unique two-pair matchings consistent with that relation:
outcome a selects a pair, b is that pair's sign parity.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .quantum_core import (
    DensityMatrix,
    NoiseParams,
    StateVector,
    dephase_all_qubits,
    flip_readout,
    tensor_states,
)
from .rng import RngStream

# 0-based index pairs per matching; pairs partition {0,1,2,3}.
MATCHING_PAIRS = {0: ((0, 1), (2, 3)), 1: ((0, 2), (1, 3))}


def _check_x(x: str) -> str:
    if len(x) != 4 or any(c not in "01" for c in x):
        raise ValueError(f"x must be a 4-bit string, got {x!r}")
    return x


def encode_hmp4(x: str) -> StateVector:
    """Sign-encode a 4-bit string on a 2-qubit register."""
    _check_x(x)
    amps = [(-1) ** int(c) * 0.5 for c in x]
    return StateVector(amps)


def encode_product(x: str) -> StateVector:
    """Separable control encoding: the same x as sign patterns on two
    independent qubits. Used only for noise-comparison experiments; it does
    not satisfy the matching relation and is excluded from validation."""
    _check_x(x)
    q_a = StateVector([(-1) ** int(x[0]) / math.sqrt(2), (-1) ** int(x[1]) / math.sqrt(2)])
    q_b = StateVector([(-1) ** int(x[2]) / math.sqrt(2), (-1) ** int(x[3]) / math.sqrt(2)])
    return tensor_states([q_a, q_b])


def hmp_check(x: str, m: int, a: int, b: int) -> bool:
    """Parity relation the server verifies (1-based indices into x)."""
    _check_x(x)
    if m not in (0, 1) or a not in (0, 1) or b not in (0, 1):
        raise ValueError("m, a, b must each be 0 or 1")
    bits = [int(c) for c in x]
    expected = bits[0] ^ bits[1 + m] if a == 0 else bits[2 - m] ^ bits[3]
    return b == expected


def matching_basis(m: int) -> list[np.ndarray]:
    """Orthonormal basis {(|i> + (-1)^b |j>)/sqrt2}, ordered (a,b) =
    (0,0),(0,1),(1,0),(1,1)."""
    if m not in (0, 1):
        raise ValueError("m must be 0 or 1")
    vectors = []
    for (i, j) in MATCHING_PAIRS[m]:
        for b in (0, 1):
            v = np.zeros(4, dtype=complex)
            v[i] = 1.0 / math.sqrt(2)
            v[j] = (-1) ** b / math.sqrt(2)
            vectors.append(v)
    return vectors


def outcome_probabilities(state, m: int) -> np.ndarray:
    """Born probabilities for the four (a, b) outcomes; accepts a StateVector
    or a DensityMatrix."""
    probs = []
    for v in matching_basis(m):
        if isinstance(state, DensityMatrix):
            probs.append(float(np.real(np.vdot(v, state.matrix @ v))))
        else:
            probs.append(float(abs(np.vdot(v, state.amplitudes)) ** 2))
    p = np.clip(np.array(probs), 0.0, None)
    return p / p.sum()


def measure_hmp4(state, m: int, rng: RngStream) -> tuple[int, int]:
    """Projective measurement in the matching basis; returns (a, b)."""
    if state.dim != 4:
        raise ValueError("hidden-matching registers are 2-qubit (dim 4)")
    p = outcome_probabilities(state, m)
    k = int(rng.generator.choice(4, p=p))
    return k // 2, k % 2


# ---------------------------------------------------------------------------
# Token issuance
# ---------------------------------------------------------------------------

@dataclass
class HmpRegister:
    """Holder-side register: the quantum state plus bookkeeping; never x."""

    state: StateVector
    encoding: str  # "matching" (validation-eligible) or "product" (control)
    used: bool = False
    stored_at_us: float = 0.0


@dataclass
class HolderToken:
    token_id: str
    registers: list[HmpRegister]


@dataclass
class ServerRegisterRecord:
    x: str
    encoding: str
    used: bool = False


@dataclass
class ServerRecord:
    token_id: str
    registers: list[ServerRegisterRecord]

    def eligible_unused(self) -> list[int]:
        return [i for i, r in enumerate(self.registers)
                if r.encoding == "matching" and not r.used]

    def to_json_dict(self) -> dict:
        return {"token_id": self.token_id,
                "registers": [{"x": r.x, "encoding": r.encoding,
                               "used": r.used} for r in self.registers]}


def token_to_json_dict(token: HolderToken) -> dict:
    """Holder-side token serialization: states (amplitudes as [re, im]
    pairs), never the encoded strings."""
    return {
        "token_id": token.token_id,
        "registers": [
            {
                "amplitudes": [[float(z.real), float(z.imag)]
                               for z in reg.state.amplitudes],
                "encoding": reg.encoding,
                "used": reg.used,
                "stored_at_us": reg.stored_at_us,
            }
            for reg in token.registers
        ],
    }


def issue(register_count: int = 16, rng: RngStream | None = None,
          control_count: int = 0,
          stored_at_us: float = 0.0) -> tuple[ServerRecord, HolderToken]:
    """Issue a token of ``register_count`` registers with random x strings.

    The last ``control_count`` registers use the separable control encoding
    (not validation-eligible); a 50/50 split of 16 reproduces the reference
    layout for noise-comparison runs. The server keeps the x list, the holder
    only states and flags.
    """
    if rng is None:
        raise ValueError("issue requires an RngStream")
    if register_count < 1:
        raise ValueError("register_count must be >= 1")
    if not 0 <= control_count <= register_count:
        raise ValueError("control_count must be in [0, register_count]")
    g = rng.generator
    token_id = format(int(g.integers(0, 1 << 62)), "016x")
    server_regs, holder_regs = [], []
    for i in range(register_count):
        x = "".join(str(int(bit)) for bit in g.integers(0, 2, size=4))
        encoding = "product" if i >= register_count - control_count else "matching"
        state = encode_product(x) if encoding == "product" else encode_hmp4(x)
        server_regs.append(ServerRegisterRecord(x=x, encoding=encoding))
        holder_regs.append(HmpRegister(state=state, encoding=encoding,
                                       stored_at_us=stored_at_us))
    return (ServerRecord(token_id=token_id, registers=server_regs),
            HolderToken(token_id=token_id, registers=holder_regs))


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationChallenge:
    token_id: str
    indices: tuple[int, ...]  # L_s
    bases: dict  # index -> m

    def to_json_dict(self) -> dict:
        return {"token_id": self.token_id, "L_s": list(self.indices),
                "bases": {str(i): m for i, m in self.bases.items()}}


@dataclass(frozen=True)
class ValidationReply:
    chosen: tuple[int, ...]  # L_d
    answers: dict  # index -> (a, b)

    def to_json_dict(self) -> dict:
        return {"L_d": list(self.chosen),
                "replies": {str(i): list(ab) for i, ab in self.answers.items()}}


@dataclass
class ValidationTranscript:
    challenge: ValidationChallenge
    reply: ValidationReply | None
    accept: bool
    error_count: int
    error: str | None = None

    def to_json_dict(self) -> dict:
        return {
            "challenge": self.challenge.to_json_dict(),
            "reply": self.reply.to_json_dict() if self.reply else None,
            "accept": self.accept,
            "error_count": self.error_count,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"


HolderOracle = Callable[[ValidationChallenge], ValidationReply]


class HonestHolder:
    """Measures its own token registers as instructed, with optional memory
    dephasing (dwell = now - stored_at) and readout flips."""

    def __init__(self, token: HolderToken, rng: RngStream,
                 noise: NoiseParams | None = None, now_us: float = 0.0):
        self.token = token
        self.rng = rng
        self.noise = noise
        self.now_us = now_us
        self._calls = 0

    def __call__(self, challenge: ValidationChallenge) -> ValidationReply:
        self._calls += 1
        rng = self.rng.substream(self._calls)
        size = 2 * len(challenge.indices) // 3
        chosen = tuple(sorted(rng.generator.choice(
            challenge.indices, size=size, replace=False).tolist()))
        answers = {}
        for j, idx in enumerate(chosen):
            reg = self.token.registers[idx]
            state = reg.state
            if self.noise is not None:
                dwell = max(0.0, self.now_us - reg.stored_at_us)
                state = dephase_all_qubits(state, dwell, self.noise.t2_us)
            sub = rng.substream(j)
            a, b = measure_hmp4(state, challenge.bases[idx], sub)
            if self.noise is not None and self.noise.readout_flip_prob > 0:
                a = flip_readout(a, self.noise.readout_flip_prob, sub.substream(1))
                b = flip_readout(b, self.noise.readout_flip_prob, sub.substream(2))
            answers[idx] = (a, b)
        for idx in challenge.indices:
            self.token.registers[idx].used = True
        return ValidationReply(chosen=chosen, answers=answers)


class ProtocolError(RuntimeError):
    """Raised when the validation session cannot even start."""


def draw_validation_challenge(server: ServerRecord, t: int,
                              rng: RngStream) -> ValidationChallenge:
    """Server side of session setup: pick t unused eligible registers and a
    random matching per register, consuming the registers."""
    if t < 3 or t % 3 != 0:
        raise ValueError("t must be a positive multiple of 3")
    eligible = server.eligible_unused()
    if len(eligible) < t:
        raise ProtocolError(f"only {len(eligible)} unused registers, need {t}")
    g = rng.generator
    indices = tuple(sorted(g.choice(eligible, size=t, replace=False).tolist()))
    bases = {i: int(g.integers(0, 2)) for i in indices}
    for i in indices:
        server.registers[i].used = True
    return ValidationChallenge(token_id=server.token_id, indices=indices,
                               bases=bases)


def judge_validation_reply(server: ServerRecord, challenge: ValidationChallenge,
                           reply: ValidationReply,
                           error_tolerance: int) -> ValidationTranscript:
    """Server side of the decision; malformed replies reject, never raise."""
    if error_tolerance < 0:
        raise ValueError("error_tolerance must be non-negative")
    t = len(challenge.indices)
    expected_size = 2 * t // 3
    malformed = (
        len(reply.chosen) != expected_size
        or len(set(reply.chosen)) != expected_size
        or any(i not in challenge.indices for i in reply.chosen)
        or set(reply.answers.keys()) != set(reply.chosen)
        or any(a not in (0, 1) or b not in (0, 1)
               for a, b in reply.answers.values())
    )
    if malformed:
        return ValidationTranscript(challenge, reply, False, 0,
                                    error="malformed reply")
    errors = sum(
        0 if hmp_check(server.registers[i].x, challenge.bases[i],
                       *reply.answers[i]) else 1
        for i in reply.chosen
    )
    return ValidationTranscript(challenge, reply,
                                accept=errors <= error_tolerance,
                                error_count=errors)


def validate(server: ServerRecord, holder: HolderOracle, t: int,
             error_tolerance: int, rng: RngStream) -> ValidationTranscript:
    """One validation session over t registers; accepts iff at most
    ``error_tolerance`` opened registers violate the parity relation.

    All t selected registers are consumed (marked used) whatever the outcome.
    """
    challenge = draw_validation_challenge(server, t, rng)
    try:
        reply = holder(challenge)
    except Exception as exc:  # holder is untrusted
        return ValidationTranscript(challenge, None, False, 0,
                                    error=f"holder failed: {exc}")
    return judge_validation_reply(server, challenge, reply, error_tolerance)


# ---------------------------------------------------------------------------
# Reference oracles (exact per-register pass probabilities)
# ---------------------------------------------------------------------------

def register_pass_probability(state, x: str, m: int) -> float:
    """Exact probability that a measurement of ``state`` with matching m
    yields an (a, b) satisfying the relation for the true string x."""
    p = outcome_probabilities(state, m)
    total = 0.0
    for k in range(4):
        if hmp_check(x, m, k // 2, k % 2):
            total += p[k]
    return float(total)


def honest_pass_probability(x: str, m: int, dwell_us: float = 0.0,
                            t2_us: float = 1.0) -> float:
    state = encode_hmp4(x)
    if dwell_us > 0:
        state = dephase_all_qubits(state, dwell_us, t2_us)
    return register_pass_probability(state, x, m)


def replay_pass_probability(x: str, measured_m: int, asked_m: int) -> float:
    """Exact pass probability for a holder that measured the register with
    matching ``measured_m`` at issue time and replays the recorded (a, b)
    when later asked for matching ``asked_m``."""
    p = outcome_probabilities(encode_hmp4(x), measured_m)
    total = 0.0
    for k in range(4):
        if hmp_check(x, asked_m, k // 2, k % 2):
            total += p[k]
    return float(total)
