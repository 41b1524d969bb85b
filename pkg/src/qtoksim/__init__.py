"""qtoksim: simulator for quantum-token authentication protocols.

Three protocol families run over a simulated noisy network with pluggable
adversaries: the QR-PUF challenge-response scheme with classical response
strings, the unknown-unitary qPUF with a SWAP-test equality check and its
property estimators, and the hidden-matching multi-factor token scheme.
"""

__version__ = "0.1.0"

from .rng import RngStream
from .quantum_core import (
    DensityMatrix,
    NoiseParams,
    StateVector,
    UnitaryOp,
    apply_unitary,
    fidelity,
    haar_unitary,
    make_single_qubit_state,
    tensor_ops,
    tensor_states,
)

__all__ = [
    "RngStream",
    "StateVector",
    "DensityMatrix",
    "UnitaryOp",
    "NoiseParams",
    "make_single_qubit_state",
    "tensor_states",
    "tensor_ops",
    "apply_unitary",
    "fidelity",
    "haar_unitary",
    "__version__",
]
