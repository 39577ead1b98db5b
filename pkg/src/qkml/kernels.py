"""Kernel evaluator protocol and the classical baseline kernels.

An evaluator is any callable (A, B) -> len(A) x len(B) kernel block; the
quantum kernel, the classical baselines, and precomputed-matrix wrappers all
share this shape, so SVM training, Nystrom construction, and the pipeline
treat them interchangeably.
"""

from __future__ import annotations

import numpy as np

from .ansatz import AnsatzConfig, AnsatzParams
from .errors import ConfigError
from .qkernel import cross_gram

CLASSICAL_KERNELS = ("linear", "rbf", "polynomial")


def linear_kernel():
    def evaluate(a, b):
        return np.atleast_2d(a) @ np.atleast_2d(b).T

    return evaluate


def rbf_kernel(bandwidth: float):
    """exp(-bandwidth * ||x - x'||^2); bandwidth plays the role of gamma."""
    if bandwidth <= 0:
        raise ConfigError(f"rbf bandwidth must be positive, got {bandwidth}")

    def evaluate(a, b):
        a = np.atleast_2d(a)
        b = np.atleast_2d(b)
        d2 = np.sum((a[:, None, :] - b[None, :, :]) ** 2, axis=2)
        return np.exp(-bandwidth * d2)

    return evaluate


def polynomial_kernel(degree: int, coef0: float = 1.0):
    """(x . x' + coef0) ** degree."""
    if degree < 1 or int(degree) != degree:
        raise ConfigError(f"polynomial degree must be an integer >= 1, got {degree}")

    def evaluate(a, b):
        return (np.atleast_2d(a) @ np.atleast_2d(b).T + coef0) ** int(degree)

    return evaluate


def classical_kernel(name: str, **hyperparams):
    """Dispatch a classical kernel evaluator by name."""
    if name == "linear":
        return linear_kernel()
    if name == "rbf":
        return rbf_kernel(hyperparams["bandwidth"])
    if name == "polynomial":
        return polynomial_kernel(hyperparams["degree"], hyperparams.get("coef0", 1.0))
    raise ConfigError(f"unknown classical kernel {name!r}; expected {CLASSICAL_KERNELS}")


def quantum_kernel_evaluator(params: AnsatzParams, config: AnsatzConfig):
    """Exact quantum kernel as a generic evaluator."""

    def evaluate(a, b):
        return cross_gram(a, b, params, config)

    return evaluate


def precomputed_kernel_evaluator(kernel: np.ndarray, X: np.ndarray):
    """Evaluator over rows of X backed by a precomputed kernel matrix.

    Rows passed to the evaluator must be rows of X (matched by value); used
    by tests and Nystrom sweeps to avoid re-deriving entries.
    """
    kernel = np.asarray(kernel, dtype=float)
    X = np.atleast_2d(np.asarray(X, dtype=float))

    def locate(rows):
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        idx = []
        for row in rows:
            matches = np.where(np.all(X == row, axis=1))[0]
            if matches.size == 0:
                raise ValueError("row not present in the precomputed kernel's dataset")
            idx.append(int(matches[0]))
        return idx

    def evaluate(a, b):
        return kernel[np.ix_(locate(a), locate(b))]

    return evaluate
