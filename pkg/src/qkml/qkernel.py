"""Quantum kernel evaluation: fidelity overlaps, Gram assembly,
parameter-shift derivatives, and pairwise-distance/margin diagnostics.

The kernel is k(x, x') = |<phi(x)|phi(x')>|^2 with phi the re-uploading
feature map. Exact mode computes overlaps from cached state vectors; shot
mode estimates each overlap as the all-zeros outcome frequency after running
the x' circuit inverted on top of the x circuit.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import statesim
from .ansatz import AnsatzConfig, AnsatzParams, apply_circuit, build_circuit, inverse_circuit, prepare_state
from .errors import SingleClassError
from .seeding import derive_seed
from .statesim import StateVector, inner_product

# Tolerances shared with the test suite.
STRUCTURAL_ATOL = 1e-10  # symmetry and unit diagonal
PSD_TOL = 1e-8  # minimum eigenvalue floor

GRAM_MAGIC = b"QKGM"
GRAM_VERSION = 1

# A trainable angle is addressed as (layer, qubit, which) with which in
# {"ry", "rz"}.
ParamIndex = tuple[int, int, str]


def shift_param(params: AnsatzParams, index: ParamIndex, delta: float) -> AnsatzParams:
    """Copy of `params` with one angle shifted by `delta`."""
    layer, qubit, which = index
    if which not in ("ry", "rz"):
        raise ValueError(f"param index kind must be 'ry' or 'rz', got {which!r}")
    if not (0 <= layer < params.layers and 0 <= qubit < params.n_qubits):
        raise ValueError(f"param index {index} out of range for shape "
                         f"({params.layers}, {params.n_qubits})")
    theta = params.theta.copy()
    theta_prime = params.theta_prime.copy()
    if which == "ry":
        theta[layer, qubit] += delta
    else:
        theta_prime[layer, qubit] += delta
    return AnsatzParams(theta, theta_prime)


def all_param_indices(config: AnsatzConfig) -> list[ParamIndex]:
    """All 2*n*L trainable-angle addresses in a fixed deterministic order."""
    return [
        (layer, qubit, which)
        for which in ("ry", "rz")
        for layer in range(config.layers)
        for qubit in range(config.n_qubits)
    ]


def states_matrix(X: np.ndarray, params: AnsatzParams, config: AnsatzConfig) -> np.ndarray:
    """Stack prepared feature-map states into an (N, 2^n) complex matrix."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return np.array([prepare_state(x, params, config).amplitudes for x in X])


def kernel_value(
    x1: np.ndarray, x2: np.ndarray, params: AnsatzParams, config: AnsatzConfig
) -> float:
    """k(x1, x2) = squared overlap of the two prepared states, in [0, 1]."""
    s1 = prepare_state(x1, params, config)
    s2 = prepare_state(x2, params, config)
    return float(abs(inner_product(s1, s2)) ** 2)


def gram_matrix(X: np.ndarray, params: AnsatzParams, config: AnsatzConfig) -> np.ndarray:
    """N x N kernel matrix; each state is prepared once and reused."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 1:
        raise ValueError("gram_matrix needs at least one row")
    states = states_matrix(X, params, config)
    overlaps = states @ states.conj().T
    gram = np.abs(overlaps) ** 2
    return (gram + gram.T) / 2.0


def cross_gram(
    X_test: np.ndarray, X_train: np.ndarray, params: AnsatzParams, config: AnsatzConfig
) -> np.ndarray:
    """Rectangular kernel block k(test_i, train_j)."""
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    if X_test.shape[0] < 1 or X_train.shape[0] < 1:
        raise ValueError("cross_gram needs non-empty test and train sets")
    s_test = states_matrix(X_test, params, config)
    s_train = states_matrix(X_train, params, config)
    return np.abs(s_test @ s_train.conj().T) ** 2


def kernel_value_shots(
    x1: np.ndarray,
    x2: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    shots: int,
    seed: int,
) -> float:
    """Finite-shot kernel estimate.

    Runs U(x2)^dagger U(x1) |0>, samples, and returns the all-zeros outcome
    frequency, whose expectation is exactly |<phi(x2)|phi(x1)>|^2.
    """
    fwd = build_circuit(np.asarray(x1, dtype=float), params, config)
    inv = inverse_circuit(build_circuit(np.asarray(x2, dtype=float), params, config))
    state = apply_circuit(statesim.new_zero_state(config.n_qubits), fwd + inv)
    counts = statesim.sample_measurements(state, shots, seed)
    return counts.frequency("0" * config.n_qubits)


def gram_matrix_shots(
    X: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    shots: int,
    seed: int,
) -> np.ndarray:
    """Shot-estimated Gram matrix with per-entry derived seeds, so the result
    does not depend on evaluation order. Diagonal is pinned to 1."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    gram = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            entry_seed = derive_seed(seed, "gram", i, j)
            gram[i, j] = gram[j, i] = kernel_value_shots(
                X[i], X[j], params, config, shots, entry_seed
            )
    return gram


def cross_gram_shots(
    X_test: np.ndarray,
    X_train: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    shots: int,
    seed: int,
) -> np.ndarray:
    X_test = np.atleast_2d(np.asarray(X_test, dtype=float))
    X_train = np.atleast_2d(np.asarray(X_train, dtype=float))
    out = np.zeros((X_test.shape[0], X_train.shape[0]))
    for i in range(X_test.shape[0]):
        for j in range(X_train.shape[0]):
            entry_seed = derive_seed(seed, "cross", i, j)
            out[i, j] = kernel_value_shots(X_test[i], X_train[j], params, config, shots, entry_seed)
    return out


def kernel_gradient_param_shift(
    x1: np.ndarray,
    x2: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    param_index: ParamIndex,
) -> float:
    """Exact dk/dtheta via the two-point parameter-shift rule.

    The addressed angle occurs once in each of the two feature-map circuits,
    so the derivative is the sum of one exact two-point shift per occurrence:

        dk/dtheta = [k(+pi/2 on x1 side) - k(-pi/2 on x1 side)] / 2
                  + [k(+pi/2 on x2 side) - k(-pi/2 on x2 side)] / 2
    """
    shift = np.pi / 2.0
    plus = shift_param(params, param_index, +shift)
    minus = shift_param(params, param_index, -shift)
    base1 = prepare_state(x1, params, config)
    base2 = prepare_state(x2, params, config)

    def overlap_sq(a: StateVector, b: StateVector) -> float:
        return float(abs(inner_product(a, b)) ** 2)

    occ1 = overlap_sq(prepare_state(x1, plus, config), base2) - overlap_sq(
        prepare_state(x1, minus, config), base2
    )
    occ2 = overlap_sq(base1, prepare_state(x2, plus, config)) - overlap_sq(
        base1, prepare_state(x2, minus, config)
    )
    return 0.5 * occ1 + 0.5 * occ2


def gram_gradient_param_shift(
    X: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    param_index: ParamIndex,
    shots: int | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Elementwise dK/dtheta for one parameter over a whole dataset.

    Exact mode reuses cached base and shifted states; shot mode estimates
    every shifted overlap with `shots` samples under per-entry derived seeds.
    The result is symmetrized, matching the symmetry of K itself.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n = X.shape[0]
    shift = np.pi / 2.0
    plus = shift_param(params, param_index, +shift)
    minus = shift_param(params, param_index, -shift)

    if shots is None:
        base = states_matrix(X, params, config)
        s_plus = states_matrix(X, plus, config)
        s_minus = states_matrix(X, minus, config)
        # d_plus[a, b] = |<phi_shifted(x_a)|phi(x_b)>|^2
        d_plus = np.abs(s_plus @ base.conj().T) ** 2
        d_minus = np.abs(s_minus @ base.conj().T) ** 2
        diff = d_plus - d_minus
    else:
        diff = np.zeros((n, n))
        tag = repr(param_index)
        for a in range(n):
            for b in range(n):
                kp = kernel_value_shots(
                    X[a], X[b], plus, config, shots, derive_seed(seed, tag, "+", a, b)
                )
                km = kernel_value_shots(
                    X[a], X[b], minus, config, shots, derive_seed(seed, tag, "-", a, b)
                )
                diff[a, b] = kp - km
    return 0.5 * diff + 0.5 * diff.T


def pairwise_quantum_distance(
    x1: np.ndarray, x2: np.ndarray, params: AnsatzParams, config: AnsatzConfig
) -> float:
    """Squared state distance ||phi(x1) - phi(x2)||^2 = 2(1 - Re<phi(x1)|phi(x2)>)."""
    s1 = prepare_state(x1, params, config)
    s2 = prepare_state(x2, params, config)
    return float(2.0 * (1.0 - inner_product(s1, s2).real))


@dataclass(frozen=True)
class MarginDiagnostics:
    """Cross-class state-distance summary; quantum_margin is the minimum."""

    quantum_margin: float
    min_cross_distance: float
    mean_cross_distance: float
    classical_margin: float | None = None


def margin_diagnostics(
    X: np.ndarray,
    y: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    classical_margin: float | None = None,
) -> MarginDiagnostics:
    """Min and mean of d_q over all (positive, negative) label pairs."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y)
    pos = np.where(y > 0)[0]
    neg = np.where(y < 0)[0]
    if len(pos) == 0 or len(neg) == 0:
        raise SingleClassError("margin diagnostics need both classes present")
    states = states_matrix(X, params, config)
    overlaps = (states[pos] @ states[neg].conj().T).real
    distances = 2.0 * (1.0 - overlaps)
    gamma = float(distances.min())
    return MarginDiagnostics(
        quantum_margin=gamma,
        min_cross_distance=gamma,
        mean_cross_distance=float(distances.mean()),
        classical_margin=classical_margin,
    )


def validate_gram(
    gram: np.ndarray,
    unit_diagonal: bool = True,
    structural_atol: float = STRUCTURAL_ATOL,
    psd_tol: float = PSD_TOL,
) -> None:
    """Raise ValueError if symmetry, diagonal, or PSD invariants fail."""
    gram = np.asarray(gram, dtype=float)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError(f"gram matrix must be square, got {gram.shape}")
    asym = float(np.abs(gram - gram.T).max())
    if asym > structural_atol:
        raise ValueError(f"gram asymmetry {asym:.2e} exceeds {structural_atol:.0e}")
    if unit_diagonal:
        diag_err = float(np.abs(np.diag(gram) - 1.0).max())
        if diag_err > structural_atol:
            raise ValueError(f"gram diagonal deviates from 1 by {diag_err:.2e}")
    min_eig = float(np.linalg.eigvalsh(gram).min())
    if min_eig < -psd_tol:
        raise ValueError(f"gram minimum eigenvalue {min_eig:.2e} below -{psd_tol:.0e}")


def dump_gram(gram: np.ndarray, path: str) -> None:
    """Write the dense binary Gram dump.

    Layout: magic b"QKGM", one version byte, N as unsigned 64-bit
    little-endian, then N*N float64 entries row-major little-endian.
    """
    gram = np.ascontiguousarray(np.asarray(gram, dtype="<f8"))
    n = gram.shape[0]
    with open(path, "wb") as fh:
        fh.write(GRAM_MAGIC)
        fh.write(bytes([GRAM_VERSION]))
        fh.write(struct.pack("<Q", n))
        fh.write(gram.tobytes(order="C"))


def load_gram(path: str) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != GRAM_MAGIC:
            raise ValueError(f"bad gram dump magic {magic!r}")
        version = fh.read(1)[0]
        if version != GRAM_VERSION:
            raise ValueError(f"unsupported gram dump version {version}")
        (n,) = struct.unpack("<Q", fh.read(8))
        data = np.frombuffer(fh.read(8 * n * n), dtype="<f8")
    return data.reshape(n, n).copy()


def dump_gram_csv(gram: np.ndarray, path: str) -> None:
    np.savetxt(path, np.asarray(gram, dtype=float), delimiter=",", fmt="%.17g")
