"""Independent brute-force oracles used by the test suite.

Everything here is built from dense kron products and exhaustive loops on
purpose: these paths must not share index arithmetic with the package code
they check.
"""

from __future__ import annotations

import numpy as np

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def ry_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


def rz_matrix(angle: float) -> np.ndarray:
    return np.diag([np.exp(-0.5j * angle), np.exp(0.5j * angle)])


def full_single(u: np.ndarray, qubit: int, n: int) -> np.ndarray:
    """Embed a 2x2 gate on `qubit` into the full 2^n matrix, little-endian."""
    m = np.eye(1, dtype=complex)
    for k in range(n):
        m = np.kron(u, m) if k == qubit else np.kron(np.eye(2, dtype=complex), m)
    return m


def full_cz(a: int, b: int, n: int) -> np.ndarray:
    diag = np.ones(2**n, dtype=complex)
    for z in range(2**n):
        if (z >> a) & 1 and (z >> b) & 1:
            diag[z] = -1.0
    return np.diag(diag)


def apply_ops_dense(ops, n: int, state: np.ndarray | None = None) -> np.ndarray:
    """Replay a gate-op list through dense matrix products."""
    if state is None:
        state = np.zeros(2**n, dtype=complex)
        state[0] = 1.0
    state = np.asarray(state, dtype=complex).copy()
    for op in ops:
        kind = op[0]
        if kind == "h":
            state = full_single(HADAMARD, op[1], n) @ state
        elif kind == "ry":
            state = full_single(ry_matrix(op[2]), op[1], n) @ state
        elif kind == "rz":
            state = full_single(rz_matrix(op[2]), op[1], n) @ state
        elif kind == "cz":
            state = full_cz(op[1], op[2], n) @ state
        else:
            raise ValueError(f"unknown op {op!r}")
    return state


def mann_whitney_auc(scores, labels) -> float:
    """O(N^2) pair-counting AUC with half credit for ties."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    pos = scores[labels > 0]
    neg = scores[labels < 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


def brute_force_min_cross_distance(states: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Min and mean of 2(1 - Re overlap) over all opposite-label pairs."""
    dists = []
    for i in range(len(y)):
        for j in range(len(y)):
            if y[i] > 0 and y[j] < 0:
                ov = np.vdot(states[i], states[j])
                dists.append(2.0 * (1.0 - ov.real))
    return float(np.min(dists)), float(np.mean(dists))
