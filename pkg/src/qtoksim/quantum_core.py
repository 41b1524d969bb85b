"""Dense complex linear algebra substrate for the protocol modules.

Pure states, density matrices, unitaries, projective measurement, Haar
sampling, fidelity / trace distance, and the noise channels (dephasing,
depolarizing, readout flips) used by the channel and memory models.

Conventions fixed here and relied on everywhere else:
  - qubit 0 is the most significant index in tensor products, so basis
    index j of an n-qubit register reads as the bitstring format(j, "0nb");
  - fidelity uses the squared convention, |<psi|phi>|^2 for pure states,
    so the two-state comparison test accepts with probability (1+F)/2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np

from .rng import RngStream

ATOL = 1e-10  # tolerance for algebraic identities (norms, unitarity, trace)

# Single-qubit constants
I2 = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
# Columns are the +i / -i eigenvectors of Y.
Y_BASIS = np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2)

# Memory dephasing time (microseconds) calibrated so a |+> state flips to
# |-> with probability 4.4% after idling 10 us.
DEFAULT_T2_US = 108.6
DEFAULT_READOUT_FLIP_PROB = 1.581e-2
DEFAULT_IDLE_DEPOLARIZE_PROB = 3.654e-4


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


class StateVector:
    """Pure state on 2^n dimensions; amplitudes normalized and immutable."""

    __slots__ = ("dim", "amplitudes")

    def __init__(self, amplitudes):
        amps = np.array(amplitudes, dtype=np.complex128).reshape(-1)
        if not _is_power_of_two(amps.size):
            raise ValueError(f"state dimension {amps.size} is not a power of two")
        norm_sq = float(np.sum(np.abs(amps) ** 2))
        if abs(norm_sq - 1.0) > 1e-8:
            raise ValueError(f"state not normalized: sum |a|^2 = {norm_sq}")
        # Scrub residual drift so chained operations stay normalized.
        amps = amps / math.sqrt(norm_sq)
        amps.setflags(write=False)
        self.amplitudes = amps
        self.dim = amps.size

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def to_density(self) -> "DensityMatrix":
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()))

    def probabilities(self) -> np.ndarray:
        p = np.abs(self.amplitudes) ** 2
        return p / p.sum()

    def __repr__(self) -> str:
        return f"StateVector(dim={self.dim})"


class DensityMatrix:
    """Mixed state: Hermitian, unit trace, positive semidefinite."""

    __slots__ = ("dim", "matrix")

    def __init__(self, matrix):
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("density matrix must be square")
        if np.max(np.abs(m - m.conj().T)) > 1e-8:
            raise ValueError("density matrix not Hermitian")
        tr = complex(np.trace(m)).real
        if abs(tr - 1.0) > 1e-8:
            raise ValueError(f"density matrix trace {tr} != 1")
        min_eig = float(np.linalg.eigvalsh(m)[0])
        if min_eig < -1e-9:
            raise ValueError(f"density matrix not PSD (min eigenvalue {min_eig})")
        m = m / tr
        m.setflags(write=False)
        self.matrix = m
        self.dim = m.shape[0]

    @property
    def num_qubits(self) -> int:
        return self.dim.bit_length() - 1

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def __repr__(self) -> str:
        return f"DensityMatrix(dim={self.dim})"


class UnitaryOp:
    """Unitary operator; U dagger U = I within Frobenius norm 1e-10."""

    __slots__ = ("dim", "matrix")

    def __init__(self, matrix):
        m = np.array(matrix, dtype=np.complex128)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("unitary must be square")
        defect = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]))
        if defect > 1e-8:
            raise ValueError(f"matrix not unitary (defect {defect:.2e})")
        m.setflags(write=False)
        self.matrix = m
        self.dim = m.shape[0]

    def dagger(self) -> "UnitaryOp":
        return UnitaryOp(self.matrix.conj().T)

    def __repr__(self) -> str:
        return f"UnitaryOp(dim={self.dim})"


@dataclass(frozen=True)
class NoiseParams:
    """Per-qubit noise knobs: memory dephasing plus device-level error rates."""

    t2_us: float = DEFAULT_T2_US
    readout_flip_prob: float = DEFAULT_READOUT_FLIP_PROB
    idle_depolarize_prob: float = DEFAULT_IDLE_DEPOLARIZE_PROB

    def __post_init__(self):
        if self.t2_us <= 0:
            raise ValueError("t2_us must be positive")
        for name in ("readout_flip_prob", "idle_depolarize_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")


State = Union[StateVector, DensityMatrix]


# ---------------------------------------------------------------------------
# State preparation and composition
# ---------------------------------------------------------------------------

def make_single_qubit_state(theta: float, phi: float) -> StateVector:
    """cos(theta)|0> + e^{i phi} sin(theta)|1>, theta in [0,pi], phi in [0,2pi].

    Note the full-angle convention: (theta, phi) and (pi-theta, phi+pi)
    describe the same physical state up to global phase.
    """
    if not 0.0 <= theta <= math.pi:
        raise ValueError(f"theta {theta} outside [0, pi]")
    if not 0.0 <= phi <= 2.0 * math.pi:
        raise ValueError(f"phi {phi} outside [0, 2*pi]")
    return StateVector([math.cos(theta), np.exp(1j * phi) * math.sin(theta)])


def tensor_states(parts: Sequence[StateVector]) -> StateVector:
    """Kronecker product in list order; parts[0] is the most significant qubit."""
    if not parts:
        raise ValueError("tensor_states requires at least one state")
    amps = parts[0].amplitudes
    for p in parts[1:]:
        amps = np.kron(amps, p.amplitudes)
    return StateVector(amps)


def tensor_ops(parts: Sequence[UnitaryOp]) -> UnitaryOp:
    if not parts:
        raise ValueError("tensor_ops requires at least one operator")
    m = parts[0].matrix
    for p in parts[1:]:
        m = np.kron(m, p.matrix)
    return UnitaryOp(m)


def apply_unitary(u: UnitaryOp, s: StateVector) -> StateVector:
    if u.dim != s.dim:
        raise ValueError(f"dimension mismatch: unitary {u.dim} vs state {s.dim}")
    return StateVector(u.matrix @ s.amplitudes)


def apply_single_qubit_gate(s: StateVector, qubit: int, gate: np.ndarray) -> StateVector:
    """Apply a 2x2 gate to one qubit of an n-qubit state without building the
    full 2^n operator."""
    n = s.num_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    psi = s.amplitudes.reshape((2,) * n)
    psi = np.tensordot(np.asarray(gate, dtype=complex), psi, axes=([1], [qubit]))
    psi = np.moveaxis(psi, 0, qubit)
    return StateVector(psi.reshape(-1))


def haar_state(dim: int, rng: RngStream) -> StateVector:
    """Uniformly random pure state (normalized complex Gaussian vector)."""
    g = rng.generator
    v = g.normal(size=dim) + 1j * g.normal(size=dim)
    return StateVector(v / np.linalg.norm(v))


def haar_unitary(dim: int, rng: RngStream) -> UnitaryOp:
    """Haar-distributed unitary via Ginibre matrix + QR with phase fix."""
    if dim < 1:
        raise ValueError("dim must be >= 1")
    g = rng.generator
    z = (g.normal(size=(dim, dim)) + 1j * g.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    q = q * (d / np.abs(d))
    return UnitaryOp(q)


# ---------------------------------------------------------------------------
# Measurement
# ---------------------------------------------------------------------------

def measure_computational(s: StateVector, rng: RngStream) -> tuple[str, StateVector]:
    """Projective measurement in the computational basis.

    Returns the outcome bitstring (most significant qubit first) and the
    collapsed basis state.
    """
    probs = s.probabilities()
    j = int(rng.generator.choice(s.dim, p=probs))
    collapsed = np.zeros(s.dim, dtype=complex)
    collapsed[j] = 1.0
    return format(j, f"0{s.num_qubits}b"), StateVector(collapsed)


def measure_in_basis(s: StateVector, basis: UnitaryOp,
                     rng: RngStream) -> tuple[str, StateVector]:
    """Measure in the orthonormal basis given by the columns of ``basis``.

    The collapsed state is the corresponding basis column.
    """
    if basis.dim != s.dim:
        raise ValueError("basis dimension mismatch")
    rotated = StateVector(basis.matrix.conj().T @ s.amplitudes)
    outcome, _ = measure_computational(rotated, rng)
    j = int(outcome, 2) if outcome else 0
    return outcome, StateVector(basis.matrix[:, j])


def measure_qubit(s: StateVector, qubit: int, basis: UnitaryOp | None,
                  rng: RngStream) -> tuple[int, StateVector]:
    """Measure a single qubit of an n-qubit state, collapsing the register.

    ``basis`` rotates that qubit before the Z measurement (None = Z basis);
    the collapsed qubit is left in the measured basis vector.
    """
    n = s.num_qubits
    work = s
    if basis is not None:
        if basis.dim != 2:
            raise ValueError("per-qubit basis must be 2x2")
        work = apply_single_qubit_gate(work, qubit, basis.matrix.conj().T)
    psi = work.amplitudes.reshape((2,) * n)
    moved = np.moveaxis(psi, qubit, 0)
    p1 = float(np.sum(np.abs(moved[1]) ** 2))
    bit = 1 if rng.generator.random() < p1 else 0
    proj = np.zeros_like(moved)
    proj[bit] = moved[bit]
    norm = np.linalg.norm(proj)
    collapsed = StateVector(np.moveaxis(proj / norm, 0, qubit).reshape(-1))
    if basis is not None:
        collapsed = apply_single_qubit_gate(collapsed, qubit, basis.matrix)
    return bit, collapsed


def measure_computational_density(rho: DensityMatrix,
                                  rng: RngStream) -> tuple[str, DensityMatrix]:
    """Computational-basis measurement of a mixed register."""
    probs = np.clip(np.real(np.diagonal(rho.matrix)), 0.0, None)
    probs = probs / probs.sum()
    j = int(rng.generator.choice(rho.dim, p=probs))
    collapsed = np.zeros((rho.dim, rho.dim), dtype=complex)
    collapsed[j, j] = 1.0
    return format(j, f"0{rho.num_qubits}b"), DensityMatrix(collapsed)


def measure_qubit_density(rho: DensityMatrix, qubit: int,
                          basis: UnitaryOp | None,
                          rng: RngStream) -> tuple[int, DensityMatrix]:
    """Single-qubit projective measurement on a mixed register."""
    n = rho.num_qubits
    if not 0 <= qubit < n:
        raise ValueError(f"qubit {qubit} out of range for {n} qubits")
    b = basis.matrix if basis is not None else I2
    projs = []
    for outcome in (0, 1):
        col = b[:, outcome:outcome + 1]
        projs.append(_embed_single_qubit(col @ col.conj().T, qubit, n))
    p1 = float(np.real(np.trace(projs[1] @ rho.matrix)))
    bit = 1 if rng.generator.random() < min(max(p1, 0.0), 1.0) else 0
    p = projs[bit]
    collapsed = p @ rho.matrix @ p
    collapsed = collapsed / np.real(np.trace(collapsed))
    return bit, DensityMatrix(collapsed)


def flip_readout(bit: int, prob: float, rng: RngStream) -> int:
    """Classical readout error: flip the bit with the given probability."""
    if not 0.0 <= prob <= 1.0:
        raise ValueError("flip probability must be in [0, 1]")
    if bit not in (0, 1):
        raise ValueError("bit must be 0 or 1")
    return bit ^ int(rng.generator.random() < prob)


# ---------------------------------------------------------------------------
# Distances
# ---------------------------------------------------------------------------

def _as_density(x: State) -> DensityMatrix:
    return x if isinstance(x, DensityMatrix) else x.to_density()


def fidelity(a: State, b: State) -> float:
    """Squared Uhlmann fidelity; |<psi|phi>|^2 when both states are pure."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    if isinstance(a, StateVector):
        return float(np.real(np.vdot(a.amplitudes, b.matrix @ a.amplitudes)))
    if isinstance(b, StateVector):
        return float(np.real(np.vdot(b.amplitudes, a.matrix @ b.amplitudes)))
    # (tr sqrt(sqrt(a) b sqrt(a)))^2 computed as the squared nuclear norm of
    # sqrt(a) sqrt(b); the SVD route keeps zero modes at machine precision
    # instead of inflating them through a square root.
    def _sqrt(m):
        w, v = np.linalg.eigh(m)
        return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T

    singular = np.linalg.svd(_sqrt(a.matrix) @ _sqrt(b.matrix),
                             compute_uv=False)
    return float(np.sum(singular) ** 2)


def state_overlap(a: State, b: State) -> float:
    """tr(rho sigma); equals fidelity when at least one argument is pure."""
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        return float(abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2)
    return float(np.real(np.trace(_as_density(a).matrix @ _as_density(b).matrix)))


def trace_distance(a: State, b: State) -> float:
    """(1/2) ||a - b||_1; computed as sqrt(1 - F) for two pure states.

    Pure-state overlaps within 1e-12 of 1 count as identical so the square
    root does not inflate rounding noise into a fake distance.
    """
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")
    if isinstance(a, StateVector) and isinstance(b, StateVector):
        gap = 1.0 - fidelity(a, b)
        return math.sqrt(gap) if gap > 1e-12 else 0.0
    diff = _as_density(a).matrix - _as_density(b).matrix
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff))))


# ---------------------------------------------------------------------------
# Noise channels
# ---------------------------------------------------------------------------

def dephasing_prob(dwell_us: float, t2_us: float) -> float:
    """Phase-flip probability after idling: p = (1 - e^{-t/T2}) / 2."""
    if dwell_us < 0:
        raise ValueError("dwell time must be non-negative")
    if t2_us <= 0:
        raise ValueError("t2_us must be positive")
    return 0.5 * (1.0 - math.exp(-dwell_us / t2_us))


def dephase(rho: DensityMatrix, dwell_us: float, t2_us: float) -> DensityMatrix:
    """Single-qubit dephasing over a dwell time: off-diagonals shrink by
    e^{-t/T2}, diagonals untouched."""
    if rho.dim != 2:
        raise ValueError("dephase acts on single-qubit density matrices")
    p = dephasing_prob(dwell_us, t2_us)
    m = rho.matrix
    return DensityMatrix((1 - p) * m + p * (PAULI_Z @ m @ PAULI_Z))


def _embed_single_qubit(op2: np.ndarray, qubit: int, num_qubits: int) -> np.ndarray:
    m = np.array([[1.0 + 0j]])
    for k in range(num_qubits):
        m = np.kron(m, op2 if k == qubit else I2)
    return m


def dephase_all_qubits(state: State, dwell_us: float, t2_us: float) -> State:
    """Independent dephasing on every qubit of a register.

    Entry (i, j) decays by gamma^hamming(i xor j) with gamma = e^{-t/T2},
    which is exactly the composition of the per-qubit channels. Returns the
    input unchanged (same type) when the dwell time is zero.
    """
    p = dephasing_prob(dwell_us, t2_us)
    if p == 0.0:
        return state
    rho = _as_density(state)
    gamma = 1.0 - 2.0 * p
    idx = np.arange(rho.dim, dtype=np.uint64)
    weights = np.bitwise_count(idx[:, None] ^ idx[None, :]).astype(float)
    return DensityMatrix(rho.matrix * gamma ** weights)


def depolarize(rho: DensityMatrix, p: float) -> DensityMatrix:
    """Whole-register depolarizing channel: (1-p) rho + p I/dim."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing probability must be in [0, 1]")
    return DensityMatrix((1 - p) * rho.matrix
                         + p * np.eye(rho.dim, dtype=complex) / rho.dim)


def depolarize_each_qubit(state: State, p: float) -> State:
    """Single-qubit depolarizing channel applied independently to each qubit,
    in the Pauli-twirl form (1 - 3p/4) rho + (p/4)(X rho X + Y rho Y + Z rho Z)
    where p is the probability of replacing the qubit by I/2.

    Pauli conjugations reduce to index flips and sign masks (Y = iXZ), so no
    embedded operators are built.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("depolarizing probability must be in [0, 1]")
    if p == 0.0:
        return state
    rho = _as_density(state)
    n = rho.num_qubits
    m = rho.matrix
    for k in range(n):
        flip = np.arange(rho.dim) ^ (1 << (n - 1 - k))
        signs = 1.0 - 2.0 * ((np.arange(rho.dim) >> (n - 1 - k)) & 1)
        z_term = m * np.outer(signs, signs)
        x_term = m[np.ix_(flip, flip)]
        y_term = z_term[np.ix_(flip, flip)]
        m = (1 - 0.75 * p) * m + (p / 4.0) * (x_term + y_term + z_term)
    return DensityMatrix(m)


# ---------------------------------------------------------------------------
# Tomography
# ---------------------------------------------------------------------------

def tomography_single_qubit(prepare: Callable[[], StateVector], shots: int,
                            rng: RngStream) -> tuple[np.ndarray, StateVector]:
    """Estimate a single-qubit state from X/Y/Z expectation values.

    ``prepare`` must yield the same state on every call (stationary source);
    it is invoked once per basis and the shot counts are drawn from the exact
    Born distribution, which is statistically identical to shot-by-shot
    simulation. Returns the empirical Bloch vector and its nearest pure state.
    """
    if shots < 3:
        raise ValueError("tomography needs at least 3 shots (one per basis)")
    per_basis = shots // 3
    g = rng.generator
    means = []
    for basis in (UnitaryOp(HADAMARD), UnitaryOp(Y_BASIS), None):
        s = prepare()
        if s.dim != 2:
            raise ValueError("tomography_single_qubit expects single-qubit states")
        amps = s.amplitudes
        if basis is None:
            p0 = float(abs(amps[0]) ** 2)
        else:
            p0 = float(abs(np.vdot(basis.matrix[:, 0], amps)) ** 2)
        n0 = int(g.binomial(per_basis, min(max(p0, 0.0), 1.0)))
        means.append((2 * n0 - per_basis) / per_basis)
    bloch = np.array(means, dtype=float)
    r = float(np.linalg.norm(bloch))
    if r < 1e-12:
        return bloch, StateVector([1.0, 0.0])
    direction = bloch / r
    half = math.acos(min(max(direction[2], -1.0), 1.0)) / 2.0
    azimuth = math.atan2(direction[1], direction[0]) % (2 * math.pi)
    estimate = StateVector([math.cos(half),
                            np.exp(1j * azimuth) * math.sin(half)])
    return bloch, estimate
