"""Nystrom low-rank kernel reconstruction and Fisher-scored observable
selection.

The approximation is K_tilde = C W^+ C^T from m landmark columns, with W^+
the Moore-Penrose pseudoinverse of the landmark block (eigendecomposition
with a relative eigenvalue cutoff, which keeps W^+ exactly symmetric).
Landmarks are drawn uniformly or by leverage scores from a pilot rank-r
eigendecomposition of the exact Gram.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .ansatz import AnsatzConfig, AnsatzParams
from .qkernel import states_matrix

PINV_RCOND = 1e-10  # relative eigenvalue cutoff for the landmark block
NYSTROM_MAGIC = b"QKNY"
NYSTROM_VERSION = 1

LANDMARK_STRATEGIES = ("uniform", "leverage")


@dataclass(frozen=True)
class NystromModel:
    """Landmark kernel factorization: K_tilde = C @ W_pinv @ C.T."""

    landmark_indices: np.ndarray
    C: np.ndarray
    W_pinv: np.ndarray
    pinv_cutoff: float

    @property
    def n_points(self) -> int:
        return self.C.shape[0]

    @property
    def n_landmarks(self) -> int:
        return self.C.shape[1]


def sample_landmarks(
    n_points: int,
    m: int,
    strategy: str = "uniform",
    seed: int = 0,
    kernel: np.ndarray | None = None,
) -> np.ndarray:
    """Draw m distinct landmark indices, sorted.

    Leverage sampling weights each point by its squared row norm in the top
    rank-min(m, 32) eigenvector block of the supplied kernel, which spreads
    landmarks across the kernel's dominant subspace instead of duplicating
    heavy clusters.
    """
    if not 1 <= m <= n_points:
        raise ValueError(f"landmark count {m} outside [1, {n_points}]")
    if strategy not in LANDMARK_STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; expected {LANDMARK_STRATEGIES}")
    rng = np.random.Generator(np.random.PCG64(seed))
    if strategy == "uniform":
        picked = rng.choice(n_points, size=m, replace=False)
    else:
        if kernel is None:
            raise ValueError("leverage sampling requires the kernel matrix")
        kernel = np.asarray(kernel, dtype=float)
        rank = min(m, 32, n_points)
        eigvals, eigvecs = np.linalg.eigh(kernel)
        top = eigvecs[:, -rank:]
        scores = np.sum(top**2, axis=1)
        scores = np.maximum(scores, 1e-15)
        picked = rng.choice(n_points, size=m, replace=False, p=scores / scores.sum())
    return np.sort(picked)


def _pinv_psd(w: np.ndarray, rcond: float = PINV_RCOND) -> tuple[np.ndarray, float]:
    """Symmetric pseudoinverse of a (near) PSD block via eigendecomposition."""
    eigvals, eigvecs = np.linalg.eigh((w + w.T) / 2.0)
    cutoff = rcond * max(float(eigvals.max(initial=0.0)), 0.0)
    inv = np.where(eigvals > cutoff, 1.0 / np.where(eigvals > cutoff, eigvals, 1.0), 0.0)
    return (eigvecs * inv) @ eigvecs.T, cutoff


def build_nystrom(
    X: np.ndarray,
    landmarks: np.ndarray,
    kernel_evaluator,
) -> NystromModel:
    """Fill C = k(X, X_landmarks) and invert the landmark block.

    `kernel_evaluator(A, B)` must return the len(A) x len(B) kernel block;
    any evaluator with that shape works (quantum, classical, precomputed).
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    landmarks = np.asarray(landmarks, dtype=int)
    if landmarks.size == 0:
        raise ValueError("need at least one landmark")
    if len(np.unique(landmarks)) != landmarks.size:
        raise ValueError("landmark indices must be distinct")
    if landmarks.min() < 0 or landmarks.max() >= X.shape[0]:
        raise ValueError("landmark index out of range")
    c_block = np.asarray(kernel_evaluator(X, X[landmarks]), dtype=float)
    w_block = c_block[landmarks, :]
    w_pinv, cutoff = _pinv_psd(w_block)
    return NystromModel(landmark_indices=landmarks, C=c_block, W_pinv=w_pinv,
                        pinv_cutoff=cutoff)


def approx_gram(model: NystromModel) -> np.ndarray:
    """Reconstruct K_tilde = C W^+ C^T, symmetrized against float drift."""
    gram = model.C @ model.W_pinv @ model.C.T
    return (gram + gram.T) / 2.0


def extend_cross(model: NystromModel, c_test: np.ndarray) -> np.ndarray:
    """Nystrom extension k_tilde(test, X) from test-landmark kernel rows."""
    c_test = np.atleast_2d(np.asarray(c_test, dtype=float))
    return c_test @ model.W_pinv @ model.C.T


def frobenius_error(kernel: np.ndarray, kernel_approx: np.ndarray) -> float:
    """||K - K_tilde||_F."""
    kernel = np.asarray(kernel, dtype=float)
    kernel_approx = np.asarray(kernel_approx, dtype=float)
    if kernel.shape != kernel_approx.shape:
        raise ValueError(f"shape mismatch {kernel.shape} vs {kernel_approx.shape}")
    return float(np.linalg.norm(kernel - kernel_approx, ord="fro"))


def eigenvalue_decay_exponent(kernel: np.ndarray, top_k: int = 16) -> float:
    """Fitted alpha in lambda_k ~ k^(-alpha) over the top_k spectrum.

    Diagnostic only: reports how fast the kernel spectrum decays, which
    governs how quickly the Nystrom error shrinks with m.
    """
    eigvals = np.sort(np.linalg.eigvalsh(np.asarray(kernel, dtype=float)))[::-1]
    eigvals = eigvals[:top_k]
    eigvals = eigvals[eigvals > 1e-14]
    if eigvals.size < 2:
        return float("nan")
    ranks = np.arange(1, eigvals.size + 1)
    slope = np.polyfit(np.log(ranks), np.log(eigvals), 1)[0]
    return float(-slope)


# ---------------------------------------------------------------------------
# Fisher-information observable selection


@dataclass(frozen=True)
class ObservableScore:
    """Z-string observable with its between-sample sensitivity score."""

    observable_id: str
    qubits: tuple[int, ...]
    fisher_score: float


def default_z_observables(n_qubits: int) -> list[tuple[int, ...]]:
    """All weight-1 and weight-2 Z strings: n + n(n-1)/2 candidates."""
    singles = [(q,) for q in range(n_qubits)]
    pairs = [(a, b) for a in range(n_qubits) for b in range(a + 1, n_qubits)]
    return singles + pairs


def observable_id(qubits: tuple[int, ...]) -> str:
    return "".join(f"Z{q}" for q in qubits)


def _z_string_expectations(states: np.ndarray, qubits: tuple[int, ...]) -> np.ndarray:
    probs = np.abs(states) ** 2
    idx = np.arange(probs.shape[1])
    parity = np.zeros_like(idx)
    for q in qubits:
        parity ^= (idx >> q) & 1
    signs = 1.0 - 2.0 * parity
    return probs @ signs


def fisher_select_observables(
    candidates: list[tuple[int, ...]],
    X: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    m_prime: int,
) -> list[ObservableScore]:
    """Rank observables by how much their expectations spread across samples.

    Score(O) = sum over ordered pairs (i, j) of (<O>_i - <O>_j)^2, the
    operational sensitivity proxy for d K_ij / d <O>: an observable whose
    expectation never varies across the dataset cannot contribute kernel
    structure and scores zero. Returns the top m_prime, ties broken by
    observable id (weight first, then qubit tuple).
    """
    if not candidates:
        raise ValueError("candidate observable set is empty")
    if not 1 <= m_prime <= len(candidates):
        raise ValueError(f"m_prime {m_prime} outside [1, {len(candidates)}]")
    states = states_matrix(X, params, config)
    n = np.atleast_2d(X).shape[0]
    scored = []
    for qubits in candidates:
        e = _z_string_expectations(states, tuple(qubits))
        # sum_{i,j} (e_i - e_j)^2 = 2*N*sum((e - mean)^2), centered for stability
        centered = e - e.mean()
        score = float(2.0 * n * np.dot(centered, centered))
        scored.append(ObservableScore(observable_id(tuple(qubits)), tuple(qubits), score))
    scored.sort(key=lambda s: (-s.fisher_score, len(s.qubits), s.qubits))
    return scored[:m_prime]


# ---------------------------------------------------------------------------
# Serialization: same container family as the Gram dump, "QKNY" magic.


def dump_nystrom(model: NystromModel, path: str) -> None:
    """Binary layout: magic b"QKNY", version byte, N and m as u64 LE,
    m landmark indices as u64 LE, pinv_cutoff as f64 LE, then C (N x m) and
    W_pinv (m x m) as row-major f64 LE."""
    n, m = model.C.shape
    with open(path, "wb") as fh:
        fh.write(NYSTROM_MAGIC)
        fh.write(bytes([NYSTROM_VERSION]))
        fh.write(struct.pack("<QQ", n, m))
        fh.write(np.asarray(model.landmark_indices, dtype="<u8").tobytes())
        fh.write(struct.pack("<d", model.pinv_cutoff))
        fh.write(np.ascontiguousarray(model.C, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.W_pinv, dtype="<f8").tobytes())


def load_nystrom(path: str) -> NystromModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != NYSTROM_MAGIC:
            raise ValueError(f"bad nystrom dump magic {magic!r}")
        version = fh.read(1)[0]
        if version != NYSTROM_VERSION:
            raise ValueError(f"unsupported nystrom dump version {version}")
        n, m = struct.unpack("<QQ", fh.read(16))
        landmarks = np.frombuffer(fh.read(8 * m), dtype="<u8").astype(int)
        (cutoff,) = struct.unpack("<d", fh.read(8))
        c_block = np.frombuffer(fh.read(8 * n * m), dtype="<f8").reshape(n, m).copy()
        w_pinv = np.frombuffer(fh.read(8 * m * m), dtype="<f8").reshape(m, m).copy()
    return NystromModel(landmark_indices=landmarks, C=c_block, W_pinv=w_pinv,
                        pinv_cutoff=cutoff)
