"""Dense state-vector simulator for small qubit registers.

Conventions, fixed for the whole toolkit:

* Qubit order is little-endian: qubit 0 is the least significant bit of the
  basis index, so basis state ``|z>`` has amplitude ``amplitudes[z]`` and
  qubit ``k`` contributes bit ``(z >> k) & 1``.
* Bitstrings in measurement counts are written in ket order (qubit n-1
  leftmost), i.e. ``format(z, f"0{n}b")``.
* Global phase is never normalized away; every externally visible quantity
  (overlap magnitudes, Z expectations, probabilities) is phase invariant.

All operations return fresh ``StateVector`` values and never mutate inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CapacityError

DEFAULT_QUBIT_CAP = 20  # 2^20 complex doubles = 16 MB per state

_INV_SQRT2 = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class StateVector:
    """Pure n-qubit state: 2^n complex amplitudes in little-endian basis order."""

    n_qubits: int
    amplitudes: np.ndarray

    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2


@dataclass(frozen=True)
class MeasurementCounts:
    """Outcome histogram of a finite-shot computational-basis measurement."""

    shots: int
    counts: dict[str, int]

    def frequency(self, bitstring: str) -> float:
        return self.counts.get(bitstring, 0) / self.shots


def new_zero_state(n: int, max_qubits: int = DEFAULT_QUBIT_CAP) -> StateVector:
    """Return |0...0> on an n-qubit register; n must be in [1, max_qubits]."""
    if not 1 <= n <= max_qubits:
        raise CapacityError(f"qubit count {n} outside supported range [1, {max_qubits}]")
    amps = np.zeros(2**n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


def _check_qubit(state: StateVector, qubit: int) -> None:
    if not 0 <= qubit < state.n_qubits:
        raise ValueError(f"qubit index {qubit} out of range for {state.n_qubits}-qubit state")


def _apply_single(state: StateVector, qubit: int, u: np.ndarray) -> StateVector:
    """Apply a 2x2 unitary to one qubit.

    Reshape to (high bits, target bit, low bits); the middle axis is the
    target qubit because qubit k occupies bit k of the flat index.
    """
    stride = 2**qubit
    psi = state.amplitudes.reshape(-1, 2, stride)
    out = np.einsum("ab,ibj->iaj", u, psi)
    return StateVector(state.n_qubits, np.ascontiguousarray(out.reshape(-1)))


def apply_hadamard(state: StateVector, qubit: int) -> StateVector:
    """Apply the Hadamard gate to the target qubit."""
    _check_qubit(state, qubit)
    h = np.array([[_INV_SQRT2, _INV_SQRT2], [_INV_SQRT2, -_INV_SQRT2]], dtype=np.complex128)
    return _apply_single(state, qubit, h)


def apply_ry(state: StateVector, qubit: int, angle: float) -> StateVector:
    """Apply RY(angle) = [[cos a/2, -sin a/2], [sin a/2, cos a/2]]."""
    _check_qubit(state, qubit)
    if not np.isfinite(angle):
        raise ValueError(f"non-finite rotation angle {angle!r}")
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    u = np.array([[c, -s], [s, c]], dtype=np.complex128)
    return _apply_single(state, qubit, u)


def apply_rz(state: StateVector, qubit: int, angle: float) -> StateVector:
    """Apply RZ(angle) = diag(exp(-i a/2), exp(+i a/2))."""
    _check_qubit(state, qubit)
    if not np.isfinite(angle):
        raise ValueError(f"non-finite rotation angle {angle!r}")
    u = np.array(
        [[np.exp(-0.5j * angle), 0.0], [0.0, np.exp(0.5j * angle)]], dtype=np.complex128
    )
    return _apply_single(state, qubit, u)


def apply_cz(state: StateVector, a: int, b: int) -> StateVector:
    """Negate amplitudes of basis states where both target qubits are 1."""
    _check_qubit(state, a)
    _check_qubit(state, b)
    if a == b:
        raise ValueError(f"controlled-Z needs two distinct qubits, got {a} twice")
    idx = np.arange(2**state.n_qubits)
    both_one = ((idx >> a) & 1) & ((idx >> b) & 1)
    amps = state.amplitudes.copy()
    amps[both_one == 1] *= -1.0
    return StateVector(state.n_qubits, amps)


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    if a.n_qubits != b.n_qubits:
        raise ValueError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def expectation_pauli_z(state: StateVector, qubit: int) -> float:
    """<Z_qubit>: probability-weighted +1/-1 over the qubit's basis bit."""
    _check_qubit(state, qubit)
    probs = state.probabilities()
    idx = np.arange(probs.size)
    signs = 1.0 - 2.0 * ((idx >> qubit) & 1)
    return float(np.dot(probs, signs))


def expectation_pauli_z_string(state: StateVector, qubits: tuple[int, ...]) -> float:
    """Expectation of a product of Z operators on the given distinct qubits."""
    if len(set(qubits)) != len(qubits):
        raise ValueError(f"repeated qubit in Z string {qubits}")
    for q in qubits:
        _check_qubit(state, q)
    probs = state.probabilities()
    idx = np.arange(probs.size)
    parity = np.zeros_like(idx)
    for q in qubits:
        parity ^= (idx >> q) & 1
    signs = 1.0 - 2.0 * parity
    return float(np.dot(probs, signs))


def sample_measurements(state: StateVector, shots: int, seed: int) -> MeasurementCounts:
    """Draw `shots` i.i.d. basis outcomes from |amplitude|^2.

    Deterministic for a given seed; uses the PCG64 generator so results are
    stable across platforms. Bitstring keys are written qubit n-1 first.
    """
    if shots < 1:
        raise ValueError(f"shot count must be >= 1, got {shots}")
    probs = state.probabilities()
    total = probs.sum()
    if not np.isclose(total, 1.0, atol=1e-8):
        raise ValueError(f"state norm deviates from 1 by {abs(total - 1.0):.2e}")
    rng = np.random.Generator(np.random.PCG64(seed))
    draws = rng.multinomial(shots, probs / total)
    n = state.n_qubits
    counts = {format(z, f"0{n}b"): int(c) for z, c in enumerate(draws) if c > 0}
    return MeasurementCounts(shots, counts)
