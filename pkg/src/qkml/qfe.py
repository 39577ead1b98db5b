"""Explicit quantum feature extraction.

Pauli-Z expectations are read out across re-uploading layer prefixes
("slices"), flattened, expanded with degree-2 cross terms, then truncated or
zero-padded to a fixed target dimension (128 by default).

Feature layout, version 1: the raw block comes first, ordered slice-major
(slice 1 qubit 0, slice 1 qubit 1, ..., slice S qubit n-1), followed by the
pairwise products v_i * v_j for i < j in lexicographic order of (i, j), then
zero padding up to target_dim. A vector longer than target_dim is truncated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ansatz import AnsatzConfig, AnsatzParams, prepare_state
from .errors import ConfigError
from .statesim import expectation_pauli_z

LAYOUT_VERSION = 1
DEFAULT_TARGET_DIM = 128


@dataclass(frozen=True)
class QfeConfig:
    """Feature-extraction settings on top of a fixed ansatz."""

    ansatz: AnsatzConfig
    params: AnsatzParams
    slices: int
    target_dim: int = DEFAULT_TARGET_DIM
    cross_term_degree: int = 2

    def __post_init__(self):
        if not 1 <= self.slices <= self.ansatz.layers:
            raise ConfigError(
                f"slices must be in [1, {self.ansatz.layers}], got {self.slices}"
            )
        if self.cross_term_degree != 2:
            raise ConfigError("only degree-2 cross terms are supported (layout v1)")
        if self.target_dim < self.slices * self.ansatz.n_qubits:
            raise ConfigError(
                f"target_dim {self.target_dim} cannot hold the "
                f"{self.slices * self.ansatz.n_qubits} raw expectations"
            )

    @property
    def n_raw(self) -> int:
        return self.slices * self.ansatz.n_qubits


def slice_expectations(
    angles: np.ndarray, params: AnsatzParams, config: AnsatzConfig, slices: int
) -> np.ndarray:
    """(slices, n_qubits) matrix of <Z_q> after each layer prefix s = 1..slices."""
    if not 1 <= slices <= config.layers:
        raise ValueError(f"slices {slices} outside [1, {config.layers}]")
    out = np.empty((slices, config.n_qubits))
    for s in range(1, slices + 1):
        state = prepare_state(angles, params, config, layers=s)
        out[s - 1] = [expectation_pauli_z(state, q) for q in range(config.n_qubits)]
    return out


def expand_cross_terms(v: np.ndarray, target_dim: int) -> np.ndarray:
    """[v, v_i*v_j for i<j] truncated or zero-padded to target_dim."""
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot expand an empty vector")
    i_idx, j_idx = np.triu_indices(v.size, k=1)
    expanded = np.concatenate([v, v[i_idx] * v[j_idx]])
    if expanded.size >= target_dim:
        return expanded[:target_dim]
    return np.pad(expanded, (0, target_dim - expanded.size))


def qfe_transform(X: np.ndarray, config: QfeConfig) -> np.ndarray:
    """(N, target_dim) feature matrix; row i expands slice expectations of x_i."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[0] < 1:
        raise ValueError("qfe_transform needs at least one row")
    rows = np.empty((X.shape[0], config.target_dim))
    for i, x in enumerate(X):
        flat = slice_expectations(x, config.params, config.ansatz, config.slices).ravel()
        rows[i] = expand_cross_terms(flat, config.target_dim)
    return rows


def feature_names(config: QfeConfig) -> list[str]:
    """Column names for the layout: raw:s{slice}q{qubit}, cross:i-j, pad:k."""
    n = config.ansatz.n_qubits
    names = [f"raw:s{s}q{q}" for s in range(1, config.slices + 1) for q in range(n)]
    n_raw = len(names)
    i_idx, j_idx = np.triu_indices(n_raw, k=1)
    names += [f"cross:{i}-{j}" for i, j in zip(i_idx, j_idx)]
    if len(names) >= config.target_dim:
        return names[: config.target_dim]
    names += [f"pad:{k}" for k in range(config.target_dim - len(names))]
    return names


def n_filled_columns(config: QfeConfig) -> int:
    """Columns carrying data (raw + cross) before padding begins."""
    n_raw = config.n_raw
    return min(config.target_dim, n_raw + n_raw * (n_raw - 1) // 2)


@dataclass(frozen=True)
class FeatureStandardizer:
    """Per-column zero-mean unit-variance scaling fitted on a training split.

    Padding columns are left untouched at zero; zero-variance data columns
    are centered but not scaled.
    """

    means: np.ndarray
    stds: np.ndarray
    n_filled: int

    @classmethod
    def fit(cls, features: np.ndarray, config: QfeConfig) -> "FeatureStandardizer":
        filled = n_filled_columns(config)
        block = np.asarray(features, dtype=float)[:, :filled]
        means = block.mean(axis=0)
        stds = block.std(axis=0)
        stds = np.where(stds < 1e-12, 1.0, stds)
        return cls(means=means, stds=stds, n_filled=filled)

    def transform(self, features: np.ndarray) -> np.ndarray:
        out = np.array(features, dtype=float, copy=True)
        out[:, : self.n_filled] = (out[:, : self.n_filled] - self.means) / self.stds
        return out


def export_features_csv(features: np.ndarray, config: QfeConfig, path: str) -> None:
    header = ",".join(feature_names(config))
    np.savetxt(path, np.asarray(features, dtype=float), delimiter=",",
               header=header, comments="", fmt="%.17g")
