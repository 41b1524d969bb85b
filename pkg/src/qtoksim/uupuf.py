"""Unknown-unitary qPUF: generation, evaluation, equality testing, estimators.

The hidden map is a Haar-random unitary on dimension 2^lambda. Authentication
keeps a quantum CRT (stored response states) and decides equality of a fresh
response against the stored reference with repeated two-state comparison
tests, each accepting with probability (1+F)/2. Estimators probe the
robustness / collision-resistance / uniqueness thresholds empirically, both
for ideal unitary devices and for epsilon-perturbed channels mixing in a
contractive map.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .quantum_core import (
    DensityMatrix,
    StateVector,
    UnitaryOp,
    fidelity,
    haar_state,
    haar_unitary,
    state_overlap,
    trace_distance,
)
from .rng import RngStream

MAX_LAMBDA = 12  # dense-simulation bound


@dataclass(frozen=True)
class UuPuf:
    """Device with a hidden Haar-random unitary; treat ``hidden_unitary`` as
    opaque outside of evaluation."""

    lam: int
    hidden_unitary: UnitaryOp
    id: str

    @property
    def dim(self) -> int:
        return self.hidden_unitary.dim


@dataclass(frozen=True)
class TestResult:
    accept: bool
    f_hat: float
    k1: int
    k2: int
    accept_count: int
    error: str | None = None


@dataclass(frozen=True)
class PerturbedPuf:
    """Channel E(rho) = (1-eps) U rho U^dag + eps C(rho) with C contractive.

    ``contractive_channel`` is "depolarize" (replace by I/dim) or "replace"
    (replace by a fixed pure state, used to probe channel dependence).
    """

    base: UuPuf
    epsilon: float
    contractive_channel: str = "depolarize"
    replacement_state: StateVector | None = None

    def __post_init__(self):
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError("epsilon must be in [0, 1]")
        if self.contractive_channel not in ("depolarize", "replace"):
            raise ValueError(f"unknown contractive channel {self.contractive_channel!r}")
        if self.contractive_channel == "replace" and self.replacement_state is None:
            raise ValueError("replace channel needs a replacement_state")


Device = Union[UuPuf, PerturbedPuf]


def qgen_uu(lam: int, rng: RngStream) -> UuPuf:
    """Generate a device on dimension 2^lambda with a fresh hidden unitary."""
    if not 1 <= lam <= MAX_LAMBDA:
        raise ValueError(f"lambda must be in [1, {MAX_LAMBDA}]")
    u = haar_unitary(2 ** lam, rng)
    return UuPuf(lam=lam, hidden_unitary=u,
                 id=f"qpuf-{rng.seed:016x}-{rng.stream_id:016x}")


def qeval(puf: UuPuf, rho_in: DensityMatrix) -> DensityMatrix:
    if rho_in.dim != puf.dim:
        raise ValueError(f"dimension mismatch: {rho_in.dim} vs {puf.dim}")
    u = puf.hidden_unitary.matrix
    return DensityMatrix(u @ rho_in.matrix @ u.conj().T)


def eval_state(puf: UuPuf, psi: StateVector) -> StateVector:
    """Pure-state fast path for qeval."""
    if psi.dim != puf.dim:
        raise ValueError(f"dimension mismatch: {psi.dim} vs {puf.dim}")
    return StateVector(puf.hidden_unitary.matrix @ psi.amplitudes)


def perturbed_eval(p: PerturbedPuf, rho: DensityMatrix,
                   rng: RngStream | None = None) -> DensityMatrix:
    """Exact density-matrix arithmetic for the perturbed channel; the rng
    argument is accepted for interface uniformity but unused."""
    out = qeval(p.base, rho)
    if p.epsilon == 0.0:
        return out
    if p.contractive_channel == "depolarize":
        contracted = np.eye(rho.dim, dtype=complex) / rho.dim
    else:
        if p.replacement_state.dim != rho.dim:
            raise ValueError("replacement state dimension mismatch")
        contracted = p.replacement_state.to_density().matrix
    return DensityMatrix((1.0 - p.epsilon) * out.matrix + p.epsilon * contracted)


def _eval_device(device: Device, state: StateVector,
                 rng: RngStream | None = None):
    """Evaluate either device kind on a pure input; unitary devices keep the
    pure representation."""
    if isinstance(device, UuPuf):
        return eval_state(device, state)
    return perturbed_eval(device, state.to_density(), rng)


# ---------------------------------------------------------------------------
# Equality testing
# ---------------------------------------------------------------------------

def swap_accept_probability(a, b) -> float:
    """(1 + tr(rho sigma)) / 2; equals (1+F)/2 when either state is pure."""
    return 0.5 * (1.0 + state_overlap(a, b))


def swap_test(psi: StateVector, phi: StateVector, rng: RngStream) -> bool:
    """Two-state comparison accepting with probability exactly (1+F)/2.

    The acceptance probability is computed analytically and then sampled;
    no ancilla register is simulated.
    """
    if psi.dim != phi.dim:
        raise ValueError("swap test requires equal dimensions")
    return bool(rng.generator.random() < swap_accept_probability(psi, phi))


def run_test_sequence(responses: Sequence, reference, k1: int, k2: int,
                      tau: float, rng: RngStream) -> TestResult:
    """Compare r = min(k1, k2) response copies against the reference.

    f_hat = max(0, 2 * accept_fraction - 1) estimates the fidelity (clamped
    to [0, 1]); the result accepts iff f_hat >= tau. For identical pure
    states every comparison accepts, so the false-reject probability is
    zero; for dissimilar states the error is the corresponding binomial tail.
    """
    if k1 < 1 or k2 < 1:
        raise ValueError("k1 and k2 must be >= 1")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    r = min(k1, k2)
    if len(responses) < r:
        raise ValueError(f"need {r} response copies, got {len(responses)}")
    g = rng.generator
    accept_count = 0
    for i in range(r):
        if reference.dim != responses[i].dim:
            return TestResult(False, 0.0, k1, k2, 0, error="dimension mismatch")
        if g.random() < swap_accept_probability(responses[i], reference):
            accept_count += 1
    f_hat = max(0.0, 2.0 * accept_count / r - 1.0)
    return TestResult(accept=f_hat >= tau, f_hat=f_hat, k1=k1, k2=k2,
                      accept_count=accept_count)


def test_algorithm(response: StateVector, reference: StateVector, k1: int,
                   k2: int, tau: float = 0.9,
                   rng: RngStream | None = None) -> TestResult:
    """Equality test from k1 response copies and k2 reference copies.

    Simulated copies are identical, so the same pair is compared
    r = min(k1, k2) times. E[f_hat] converges to F as r grows.
    """
    if rng is None:
        raise ValueError("test_algorithm requires an RngStream")
    return run_test_sequence([response] * min(k1, k2), reference, k1, k2, tau, rng)


# ---------------------------------------------------------------------------
# Property estimators
# ---------------------------------------------------------------------------

_PASS_SLACK = 1e-9  # numeric guard so exact-threshold pairs don't flip


def _orthogonal_complement(psi: StateVector, rng: RngStream) -> StateVector:
    for _ in range(32):
        raw = haar_state(psi.dim, rng)
        comp = raw.amplitudes - np.vdot(psi.amplitudes, raw.amplitudes) * psi.amplitudes
        nrm = np.linalg.norm(comp)
        if nrm > 1e-8:
            return StateVector(comp / nrm)
    raise RuntimeError("failed to sample an orthogonal direction")


def sample_pair_with_fidelity(dim: int, f_lo: float, f_hi: float,
                              rng: RngStream) -> tuple[StateVector, StateVector, float]:
    """Random pure pair whose input fidelity is uniform on [f_lo, f_hi]."""
    if not 0.0 <= f_lo <= f_hi <= 1.0:
        raise ValueError("fidelity range must satisfy 0 <= lo <= hi <= 1")
    psi = haar_state(dim, rng.substream(0))
    chi = _orthogonal_complement(psi, rng.substream(1))
    g = rng.generator
    f_target = g.uniform(f_lo, f_hi)
    alpha = math.acos(math.sqrt(f_target))
    beta = g.uniform(0.0, 2.0 * math.pi)
    other = StateVector(math.cos(alpha) * psi.amplitudes
                        + np.exp(1j * beta) * math.sin(alpha) * chi.amplitudes)
    return psi, other, float(f_target)


def estimate_robustness(device: Device, delta_r: float, trials: int,
                        rng: RngStream) -> float:
    """Fraction of delta_r-indistinguishable input pairs (F_in >= delta_r)
    whose outputs remain delta_r-indistinguishable."""
    if not 0.0 <= delta_r <= 1.0:
        raise ValueError("delta_r must be in [0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    passes = 0
    for t in range(trials):
        sub = rng.substream(t)
        dim = device.dim if isinstance(device, UuPuf) else device.base.dim
        a, b, _ = sample_pair_with_fidelity(dim, delta_r, 1.0, sub.substream(0))
        out_a = _eval_device(device, a, sub.substream(1))
        out_b = _eval_device(device, b, sub.substream(2))
        if fidelity(out_a, out_b) >= delta_r - _PASS_SLACK:
            passes += 1
    return passes / trials


def estimate_collision_resistance(device: Device, delta_c: float, trials: int,
                                  rng: RngStream) -> float:
    """Fraction of delta_c-distinguishable input pairs (F_in <= 1 - delta_c)
    whose outputs remain delta_c-distinguishable."""
    if not 0.0 <= delta_c <= 1.0:
        raise ValueError("delta_c must be in [0, 1]")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    passes = 0
    for t in range(trials):
        sub = rng.substream(t)
        dim = device.dim if isinstance(device, UuPuf) else device.base.dim
        a, b, _ = sample_pair_with_fidelity(dim, 0.0, 1.0 - delta_c, sub.substream(0))
        out_a = _eval_device(device, a, sub.substream(1))
        out_b = _eval_device(device, b, sub.substream(2))
        if fidelity(out_a, out_b) <= 1.0 - delta_c + _PASS_SLACK:
            passes += 1
    return passes / trials


def estimate_uniqueness(puf_a: UuPuf, puf_b: UuPuf, trials: int,
                        rng: RngStream) -> float:
    """Average output trace distance over Haar-random pure inputs.

    This is a sampling lower-bound proxy for the (expensive) worst-case
    channel distance: the diamond norm is at least twice this average.
    """
    if puf_a.dim != puf_b.dim:
        raise ValueError("devices must share a dimension")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    total = 0.0
    for t in range(trials):
        psi = haar_state(puf_a.dim, rng.substream(t))
        total += trace_distance(eval_state(puf_a, psi), eval_state(puf_b, psi))
    return total / trials


# ---------------------------------------------------------------------------
# Authentication with a quantum CRT
# ---------------------------------------------------------------------------

@dataclass
class QuantumCrtEntry:
    challenge: StateVector
    response_copies: list  # identical stored states; length is the copy budget


@dataclass
class QuantumCrt:
    entries: list[QuantumCrtEntry]

    def entry(self, index: int) -> QuantumCrtEntry:
        if not 0 <= index < len(self.entries):
            raise KeyError(f"no quantum CRT entry {index}")
        return self.entries[index]


def issue_quantum_crt(puf: UuPuf, num_entries: int, copies: int,
                      rng: RngStream) -> QuantumCrt:
    """Query the device with random challenges and store the responses.

    The simulator stores the exact response state; ``copies`` is the stored
    copy budget k2."""
    if num_entries < 1 or copies < 1:
        raise ValueError("num_entries and copies must be >= 1")
    entries = []
    for i in range(num_entries):
        challenge = haar_state(puf.dim, rng.substream(i))
        response = eval_state(puf, challenge)
        entries.append(QuantumCrtEntry(challenge=challenge,
                                       response_copies=[response] * copies))
    return QuantumCrt(entries=entries)


Holder = Callable[[StateVector], Union[StateVector, DensityMatrix]]


def honest_holder(puf: UuPuf) -> Holder:
    return lambda challenge: eval_state(puf, challenge)


def uu_authenticate(puf_holder: Holder, crt: QuantumCrt, entry: int, k1: int,
                    tau: float, rng: RngStream) -> TestResult:
    """Send the stored challenge k1 times and test the responses against the
    stored reference copies."""
    rec = crt.entry(entry)
    k2 = len(rec.response_copies)
    r = min(k1, k2)
    responses = []
    for i in range(r):
        try:
            resp = puf_holder(rec.challenge)
        except Exception as exc:  # holder is untrusted
            return TestResult(False, 0.0, k1, k2, 0, error=f"holder failed: {exc}")
        if not isinstance(resp, (StateVector, DensityMatrix)) \
                or resp.dim != rec.challenge.dim:
            return TestResult(False, 0.0, k1, k2, 0, error="holder returned wrong dimension")
        responses.append(resp)
    return run_test_sequence(responses, rec.response_copies[0], k1, k2, tau,
                             rng.substream(0x7e57))
