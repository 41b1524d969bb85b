"""QR-PUF challenge-response authentication.

The PUF is a tensor product of hidden single-qubit unitaries. Enrollment
builds a purely classical challenge-response table: for each challenge the
certifier characterizes every output qubit, derives a "shifter" rotation
taking it to |0>, quantizes the shifter angles to b-bit codes (the w string),
and records the measurement string o obtained after applying the quantized
shifters (all zeros when noiseless). Verification replays a challenge against
a responder and accepts if the re-measured o string is within a Hamming
threshold of the stored one.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .quantum_core import (
    DensityMatrix,
    StateVector,
    UnitaryOp,
    apply_single_qubit_gate,
    fidelity,
    haar_unitary,
    make_single_qubit_state,
    measure_computational,
    measure_computational_density,
    tensor_ops,
    tensor_states,
)
from .rng import RngStream

DEFAULT_QUANT_BITS = 8


@dataclass(frozen=True)
class QrPuf:
    """lambda-fold product of hidden single-qubit gates."""

    lam: int
    gates: tuple[UnitaryOp, ...]

    def __post_init__(self):
        if self.lam < 1:
            raise ValueError("lambda must be >= 1")
        if len(self.gates) != self.lam:
            raise ValueError("gate count must equal lambda")
        for g in self.gates:
            if g.dim != 2:
                raise ValueError("QR-PUF gates must be single qubit")


@dataclass(frozen=True)
class Challenge:
    """Indexed separable challenge: per-qubit (theta, phi) plus a bit label."""

    index: int
    angles: tuple[tuple[float, float], ...]
    bitstring_label: str

    @property
    def lam(self) -> int:
        return len(self.angles)

    def state(self) -> StateVector:
        return tensor_states([make_single_qubit_state(t, p) for t, p in self.angles])


@dataclass(frozen=True)
class ShifterConfig:
    """Per-qubit rotations to |0> plus their quantized classical encoding."""

    exact_ops: tuple[UnitaryOp, ...]
    quantized_angles: tuple[tuple[int, int], ...]
    w_string: str


@dataclass(frozen=True)
class CrtEntry:
    challenge: Challenge
    w_string: str
    o_string: str
    y_string: str

    def __post_init__(self):
        if self.y_string != self.w_string + self.o_string:
            raise ValueError("y must be the concatenation w || o")


@dataclass
class ChallengeResponseTable:
    entries: list[CrtEntry]
    lam: int
    n: int
    b: int
    mode: str
    _index: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        seen = set()
        for e in self.entries:
            if e.challenge.index in seen:
                raise ValueError(f"duplicate challenge index {e.challenge.index}")
            seen.add(e.challenge.index)
        self._index = {e.challenge.index: e for e in self.entries}

    def entry(self, index: int) -> CrtEntry:
        if index not in self._index:
            raise KeyError(f"no CRT entry with index {index}")
        return self._index[index]

    def to_json_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "n": self.n,
            "b": self.b,
            "mode": self.mode,
            "entries": [
                {
                    "index": e.challenge.index,
                    "angles": [[t, p] for t, p in e.challenge.angles],
                    "w": e.w_string,
                    "o": e.o_string,
                    "y": e.y_string,
                }
                for e in self.entries
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json_dict(cls, d: dict) -> "ChallengeResponseTable":
        entries = []
        for rec in d["entries"]:
            ch = Challenge(
                index=int(rec["index"]),
                angles=tuple((float(t), float(p)) for t, p in rec["angles"]),
                bitstring_label=format(int(rec["index"]), f"0{int(d['n'])}b"),
            )
            entries.append(CrtEntry(ch, rec["w"], rec["o"], rec["y"]))
        return cls(entries=entries, lam=int(d["lambda"]), n=int(d["n"]),
                   b=int(d["b"]), mode=d["mode"])


@dataclass(frozen=True)
class VerifyResult:
    accept: bool
    observed_o: str
    hamming_weight: int
    error: str | None = None


# ---------------------------------------------------------------------------
# Generation and challenge selection
# ---------------------------------------------------------------------------

def qgen_qr(lam: int, rng: RngStream) -> QrPuf:
    """Manufacture a PUF: lambda independent Haar single-qubit gates."""
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    gates = tuple(haar_unitary(2, rng.substream(k)) for k in range(lam))
    return QrPuf(lam=lam, gates=gates)


def _random_angles(lam: int, rng: RngStream) -> tuple[tuple[float, float], ...]:
    g = rng.generator
    # cos(theta) uniform on [-1, 1], phi uniform on [0, 2pi)
    thetas = np.arccos(g.uniform(-1.0, 1.0, size=lam))
    phis = g.uniform(0.0, 2.0 * math.pi, size=lam)
    return tuple((float(t), float(p)) for t, p in zip(thetas, phis))


def select_challenges(count: int, lam: int, rng: RngStream) -> list[Challenge]:
    """Draw ``count`` random separable challenges with pairwise nonzero overlap.

    Labels enumerate 0..count-1 in binary with n = max(1, ceil(log2 count))
    bits. Exactly orthogonal pairs (probability zero) are resampled.
    """
    if count < 1:
        raise ValueError("challenge count must be >= 1")
    if lam < 1:
        raise ValueError("lambda must be >= 1")
    n = max(1, math.ceil(math.log2(count))) if count > 1 else 1
    challenges: list[Challenge] = []
    states: list[StateVector] = []
    for i in range(count):
        for attempt in range(100):
            angles = _random_angles(lam, rng.substream(i * 128 + attempt))
            st = tensor_states([make_single_qubit_state(t, p) for t, p in angles])
            if all(fidelity(st, prev) > 0.0 for prev in states):
                break
        else:
            raise RuntimeError("could not sample a non-orthogonal challenge")
        challenges.append(Challenge(index=i, angles=angles,
                                    bitstring_label=format(i, f"0{n}b")))
        states.append(st)
    return challenges


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def evaluate_qubits(puf: QrPuf, c: Challenge) -> list[StateVector]:
    """Per-qubit PUF outputs (before tensoring)."""
    if c.lam != puf.lam:
        raise ValueError(f"challenge has {c.lam} qubits, PUF expects {puf.lam}")
    outs = []
    for (theta, phi), gate in zip(c.angles, puf.gates):
        outs.append(StateVector(gate.matrix
                                @ make_single_qubit_state(theta, phi).amplitudes))
    return outs


def evaluate_qr(puf: QrPuf, c: Challenge) -> StateVector:
    return tensor_states(evaluate_qubits(puf, c))


def apply_puf(puf: QrPuf, state):
    """Apply the PUF's product unitary to an arbitrary (possibly entangled,
    possibly mixed) register of matching size."""
    if state.num_qubits != puf.lam:
        raise ValueError("register size mismatch")
    if isinstance(state, DensityMatrix):
        u = tensor_ops(puf.gates).matrix
        return DensityMatrix(u @ state.matrix @ u.conj().T)
    out = state
    for k, gate in enumerate(puf.gates):
        out = apply_single_qubit_gate(out, k, gate.matrix)
    return out


# ---------------------------------------------------------------------------
# Shifters
# ---------------------------------------------------------------------------

def _canonical_angles(state: StateVector) -> tuple[float, float]:
    """(theta, phi) with theta in [0, pi/2], phi in [0, 2pi), such that the
    state equals cos(theta)|0> + e^{i phi} sin(theta)|1> up to global phase."""
    a0, a1 = state.amplitudes
    if abs(a0) < 1e-12:
        return math.pi / 2.0, float(np.angle(a1) % (2 * math.pi))
    rel = a1 * (a0.conjugate() / abs(a0))
    theta = math.acos(min(abs(a0), 1.0))
    phi = float(np.angle(rel) % (2 * math.pi)) if abs(a1) > 1e-12 else 0.0
    return theta, phi


def _shifter_from_angles(theta: float, phi: float) -> UnitaryOp:
    # Rotation sending cos(theta)|0> + e^{i phi} sin(theta)|1> to |0>.
    return UnitaryOp([
        [math.cos(theta), np.exp(-1j * phi) * math.sin(theta)],
        [-np.exp(1j * phi) * math.sin(theta), math.cos(theta)],
    ])


def quantize_angles(theta: float, phi: float, b: int) -> tuple[int, int]:
    levels = (1 << b) - 1
    return (int(round(theta / math.pi * levels)),
            int(round(phi / (2 * math.pi) * levels)))


def dequantize_angles(code: tuple[int, int], b: int) -> tuple[float, float]:
    levels = (1 << b) - 1
    return code[0] * math.pi / levels, code[1] * 2 * math.pi / levels


def derive_shifter(output_qubit: StateVector,
                   quant_bits: int = DEFAULT_QUANT_BITS) -> tuple[UnitaryOp, tuple[int, int]]:
    """Exact rotation taking a pure output qubit to |0>, plus its b-bit code."""
    if output_qubit.dim != 2:
        raise ValueError("shifters are derived per qubit")
    if quant_bits < 1:
        raise ValueError("quant_bits must be >= 1")
    theta, phi = _canonical_angles(output_qubit)
    return _shifter_from_angles(theta, phi), quantize_angles(theta, phi, quant_bits)


def derive_shifters(output_qubits: Sequence[StateVector], b: int) -> ShifterConfig:
    exact, codes, w_parts = [], [], []
    for q in output_qubits:
        op, code = derive_shifter(q, b)
        exact.append(op)
        codes.append(code)
        w_parts.append(format(code[0], f"0{b}b") + format(code[1], f"0{b}b"))
    return ShifterConfig(exact_ops=tuple(exact), quantized_angles=tuple(codes),
                         w_string="".join(w_parts))


def shifters_from_w(w_string: str, lam: int, b: int) -> list[UnitaryOp]:
    """Rebuild the quantized shifters from the classical w string (the only
    thing the verifier holds)."""
    if len(w_string) != 2 * b * lam:
        raise ValueError(f"w string length {len(w_string)} != 2*b*lambda")
    ops = []
    for k in range(lam):
        chunk = w_string[2 * b * k: 2 * b * (k + 1)]
        code = (int(chunk[:b], 2), int(chunk[b:], 2))
        ops.append(_shifter_from_angles(*dequantize_angles(code, b)))
    return ops


def quantized_shifter(code: tuple[int, int], b: int) -> UnitaryOp:
    return _shifter_from_angles(*dequantize_angles(code, b))


# ---------------------------------------------------------------------------
# Enrollment
# ---------------------------------------------------------------------------

def enroll(puf: QrPuf, challenges: Sequence[Challenge], mode: str = "analytic",
           shots: int = 90000, b: int = DEFAULT_QUANT_BITS,
           rng: RngStream | None = None) -> ChallengeResponseTable:
    """Build the classical CRT by characterizing every output qubit.

    mode="analytic" uses the exact simulated output states and extracts o by
    deterministic rounding (most-likely outcome), so the noiseless o string
    is exactly all zeros. mode="tomography" estimates each output qubit from
    ``shots`` measurement shots and samples o from the Born distribution.
    """
    if mode not in ("analytic", "tomography"):
        raise ValueError(f"unknown enrollment mode {mode!r}")
    if mode == "tomography":
        if rng is None:
            raise ValueError("tomography mode requires an RngStream")
        if shots < 3:
            raise ValueError("tomography mode needs shots >= 3")
    if not challenges:
        raise ValueError("enrollment needs at least one challenge")
    n = len(challenges[0].bitstring_label)

    entries = []
    for e_idx, ch in enumerate(challenges):
        true_outputs = evaluate_qubits(puf, ch)
        if mode == "analytic":
            characterized = true_outputs
        else:
            from .quantum_core import tomography_single_qubit
            characterized = []
            for k, out in enumerate(true_outputs):
                sub = rng.substream(e_idx * 4096 + k)
                _, estimate = tomography_single_qubit(lambda out=out: out, shots, sub)
                characterized.append(estimate)
        shifters = derive_shifters(characterized, b)

        o_bits = []
        for k, out in enumerate(true_outputs):
            quant = quantized_shifter(shifters.quantized_angles[k], b)
            rotated = quant.matrix @ out.amplitudes
            p1 = float(abs(rotated[1]) ** 2)
            if mode == "analytic":
                bit = 1 if p1 > 0.5 else 0
            else:
                sub = rng.substream(e_idx * 4096 + 2048 + k)
                bit = 1 if sub.generator.random() < p1 else 0
            o_bits.append(str(bit))
        o_string = "".join(o_bits)
        entries.append(CrtEntry(challenge=ch, w_string=shifters.w_string,
                                o_string=o_string,
                                y_string=shifters.w_string + o_string))
    return ChallengeResponseTable(entries=entries, lam=puf.lam, n=n, b=b, mode=mode)


# ---------------------------------------------------------------------------
# Verification
# ---------------------------------------------------------------------------

Responder = Callable[[StateVector], StateVector]


def honest_responder(puf: QrPuf) -> Responder:
    return lambda state: apply_puf(puf, state)


def readout_bits(state, shifter_ops: Sequence[UnitaryOp],
                 rng: RngStream) -> str:
    """Apply per-qubit shifters then measure all qubits in {|0>,|1>}."""
    if isinstance(state, DensityMatrix):
        u = tensor_ops(shifter_ops).matrix
        rotated = DensityMatrix(u @ state.matrix @ u.conj().T)
        outcome, _ = measure_computational_density(rotated, rng)
        return outcome
    work = state
    for k, op in enumerate(shifter_ops):
        work = apply_single_qubit_gate(work, k, op.matrix)
    outcome, _ = measure_computational(work, rng)
    return outcome


def majority_bits(samples: Sequence[str]) -> str:
    """Per-position majority vote; ties resolve to 1 (conservative reject)."""
    if not samples:
        raise ValueError("majority vote needs at least one sample")
    length = len(samples[0])
    out = []
    for pos in range(length):
        ones = sum(1 for s in samples if s[pos] == "1")
        out.append("1" if 2 * ones >= len(samples) else "0")
    return "".join(out)


def hamming_distance(a: str, b: str) -> int:
    if len(a) != len(b):
        raise ValueError("bitstring length mismatch")
    return sum(1 for x, y in zip(a, b) if x != y)


def verify(crt: ChallengeResponseTable, entry_index: int, responder: Responder,
           hamming_threshold: int, shots_per_qubit: int,
           rng: RngStream) -> VerifyResult:
    """Replay one CRT entry against a responder.

    The challenge state is re-prepared and sent ``shots_per_qubit`` times (use
    1 for responders that cannot be re-queried); per-qubit outcomes are
    decided by majority vote. A responder returning the wrong dimension
    yields a reject with an error flag rather than an exception.
    """
    if shots_per_qubit < 1:
        raise ValueError("shots_per_qubit must be >= 1")
    if hamming_threshold < 0:
        raise ValueError("hamming_threshold must be non-negative")
    entry = crt.entry(entry_index)
    shifter_ops = shifters_from_w(entry.w_string, crt.lam, crt.b)

    samples = []
    for rep in range(shots_per_qubit):
        challenge_state = entry.challenge.state()
        try:
            response = responder(challenge_state)
        except Exception as exc:  # responder is untrusted
            return VerifyResult(False, "", crt.lam, error=f"responder failed: {exc}")
        if not isinstance(response, StateVector) or response.dim != challenge_state.dim:
            return VerifyResult(False, "", crt.lam, error="responder returned wrong dimension")
        samples.append(readout_bits(response, shifter_ops, rng.substream(rep)))

    observed = majority_bits(samples)
    hw = hamming_distance(observed, entry.o_string)
    return VerifyResult(accept=hw <= hamming_threshold, observed_o=observed,
                        hamming_weight=hw)
