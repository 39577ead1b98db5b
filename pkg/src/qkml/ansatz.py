"""Data re-uploading circuit: Hadamard init, per-feature RY encoding,
trainable RY/RZ rotations, nearest-neighbor CZ entanglers.

The circuit for one layer is: encode every qubit with RY(angle_i), rotate
every qubit with RY(theta[l, i]) then RZ(theta_prime[l, i]), entangle along
the configured CZ pattern. Circuits are built as explicit gate lists so that
callers can run layer prefixes, inverses, and parameter-shifted variants.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import statesim
from .errors import ConfigError, ConstantFeatureWarning
from .statesim import StateVector

ENTANGLE_PATTERNS = ("chain", "ring")

# Gate ops are ("h", qubit) | ("ry", qubit, angle) | ("rz", qubit, angle)
# | ("cz", a, b).
GateOp = tuple


@dataclass(frozen=True)
class AnsatzConfig:
    """Circuit shape: register width, layer count, entangler pattern.

    By default the encoded feature dimension must equal n_qubits. With
    feature_folding enabled, longer feature vectors are spread across
    re-uploading layers round-robin (layer l encodes angles
    [(l*n + i) mod d]).
    """

    n_qubits: int
    layers: int = 2
    entangle_pattern: str = "chain"
    hadamard_init: bool = True
    feature_folding: bool = False

    def __post_init__(self):
        if self.n_qubits < 1:
            raise ConfigError(f"n_qubits must be >= 1, got {self.n_qubits}")
        if self.layers < 1:
            raise ConfigError(f"layers must be >= 1, got {self.layers}")
        if self.entangle_pattern not in ENTANGLE_PATTERNS:
            raise ConfigError(
                f"unknown entangle_pattern {self.entangle_pattern!r}; "
                f"expected one of {ENTANGLE_PATTERNS}"
            )

    @property
    def n_parameters(self) -> int:
        return 2 * self.n_qubits * self.layers


@dataclass(frozen=True)
class AnsatzParams:
    """Trainable angles: theta for the RY block, theta_prime for the RZ block,
    each of shape (layers, n_qubits)."""

    theta: np.ndarray
    theta_prime: np.ndarray

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float)
        theta_prime = np.asarray(self.theta_prime, dtype=float)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "theta_prime", theta_prime)
        if theta.ndim != 2 or theta.shape != theta_prime.shape:
            raise ConfigError(
                f"theta and theta_prime must share a (layers, n_qubits) shape, "
                f"got {theta.shape} and {theta_prime.shape}"
            )
        if not (np.isfinite(theta).all() and np.isfinite(theta_prime).all()):
            raise ConfigError("ansatz parameters must be finite")

    @property
    def layers(self) -> int:
        return self.theta.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.theta.shape[1]

    def flat(self) -> np.ndarray:
        """Concatenated copy [theta.ravel(), theta_prime.ravel()]."""
        return np.concatenate([self.theta.ravel(), self.theta_prime.ravel()])

    def norm_sq(self) -> float:
        return float(np.sum(self.theta**2) + np.sum(self.theta_prime**2))


def zero_params(config: AnsatzConfig) -> AnsatzParams:
    shape = (config.layers, config.n_qubits)
    return AnsatzParams(np.zeros(shape), np.zeros(shape))


def random_params(config: AnsatzConfig, seed: int, scale: float = np.pi / 10) -> AnsatzParams:
    """Small random initialization in [-scale, scale], seeded."""
    rng = np.random.Generator(np.random.PCG64(seed))
    shape = (config.layers, config.n_qubits)
    return AnsatzParams(
        rng.uniform(-scale, scale, size=shape), rng.uniform(-scale, scale, size=shape)
    )


@dataclass(frozen=True)
class FeatureRanges:
    """Per-feature min/max fitted on training data, for angle encoding."""

    mins: np.ndarray
    maxs: np.ndarray
    constant_mask: np.ndarray = field(compare=False, default=None)

    def __post_init__(self):
        mins = np.asarray(self.mins, dtype=float)
        maxs = np.asarray(self.maxs, dtype=float)
        if mins.shape != maxs.shape or mins.ndim != 1:
            raise ConfigError("feature ranges need matching 1-d min and max vectors")
        if np.any(maxs < mins):
            raise ConfigError("feature range has max < min")
        object.__setattr__(self, "mins", mins)
        object.__setattr__(self, "maxs", maxs)
        object.__setattr__(self, "constant_mask", maxs == mins)

    @classmethod
    def fit(cls, x: np.ndarray) -> "FeatureRanges":
        x = np.asarray(x, dtype=float)
        return cls(x.min(axis=0), x.max(axis=0))


def encode_features(x: np.ndarray, ranges: FeatureRanges) -> np.ndarray:
    """Min-max scale a feature vector to angles in [0, pi].

    angle_i = pi * (x_i - min_i) / (max_i - min_i), clamped to [0, pi] so
    out-of-range test points never crash downstream circuits. Constant
    features (min == max) encode to angle 0 and raise ConstantFeatureWarning.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != ranges.mins.shape:
        raise ValueError(f"feature vector shape {x.shape} does not match ranges {ranges.mins.shape}")
    span = ranges.maxs - ranges.mins
    if ranges.constant_mask.any():
        warnings.warn(
            f"{int(ranges.constant_mask.sum())} constant feature(s) encoded to angle 0",
            ConstantFeatureWarning,
            stacklevel=2,
        )
    safe_span = np.where(ranges.constant_mask, 1.0, span)
    angles = np.pi * (x - ranges.mins) / safe_span
    angles = np.where(ranges.constant_mask, 0.0, angles)
    return np.clip(angles, 0.0, np.pi)


def entangle_edges(config: AnsatzConfig) -> list[tuple[int, int]]:
    """CZ edges for the configured pattern: chain (i, i+1); ring adds the
    wrap-around edge when it is not a duplicate (n > 2)."""
    n = config.n_qubits
    edges = [(i, i + 1) for i in range(n - 1)]
    if config.entangle_pattern == "ring" and n > 2:
        edges.append((n - 1, 0))
    return edges


def _layer_angles(angles: np.ndarray, layer: int, config: AnsatzConfig) -> np.ndarray:
    n = config.n_qubits
    if angles.shape[0] == n:
        return angles
    if not config.feature_folding:
        raise ValueError(
            f"got {angles.shape[0]} angles for {n} qubits; enable feature_folding "
            "to spread extra features across layers"
        )
    d = angles.shape[0]
    return angles[(layer * n + np.arange(n)) % d]


def build_circuit(
    angles: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    layers: int | None = None,
) -> list[GateOp]:
    """Gate list for the first `layers` re-uploading layers (default: all)."""
    angles = np.asarray(angles, dtype=float)
    if angles.ndim != 1:
        raise ValueError("encoded angles must be a 1-d vector")
    if angles.shape[0] != config.n_qubits and not config.feature_folding:
        raise ValueError(
            f"angle count {angles.shape[0]} does not match n_qubits {config.n_qubits}"
        )
    if (params.layers, params.n_qubits) != (config.layers, config.n_qubits):
        raise ValueError(
            f"parameter shape {(params.layers, params.n_qubits)} does not match "
            f"config {(config.layers, config.n_qubits)}"
        )
    total = config.layers if layers is None else layers
    if not 0 <= total <= config.layers:
        raise ValueError(f"layer prefix {total} outside [0, {config.layers}]")

    ops: list[GateOp] = []
    if config.hadamard_init:
        ops.extend(("h", q) for q in range(config.n_qubits))
    edges = entangle_edges(config)
    for layer in range(total):
        enc = _layer_angles(angles, layer, config)
        ops.extend(("ry", q, float(enc[q])) for q in range(config.n_qubits))
        for q in range(config.n_qubits):
            ops.append(("ry", q, float(params.theta[layer, q])))
            ops.append(("rz", q, float(params.theta_prime[layer, q])))
        ops.extend(("cz", a, b) for a, b in edges)
    return ops


def inverse_circuit(ops: list[GateOp]) -> list[GateOp]:
    """Reverse the gate list, negating rotation angles (H and CZ are involutions)."""
    inv: list[GateOp] = []
    for op in reversed(ops):
        if op[0] in ("ry", "rz"):
            inv.append((op[0], op[1], -op[2]))
        else:
            inv.append(op)
    return inv


def apply_circuit(state: StateVector, ops: list[GateOp]) -> StateVector:
    for op in ops:
        kind = op[0]
        if kind == "h":
            state = statesim.apply_hadamard(state, op[1])
        elif kind == "ry":
            state = statesim.apply_ry(state, op[1], op[2])
        elif kind == "rz":
            state = statesim.apply_rz(state, op[1], op[2])
        elif kind == "cz":
            state = statesim.apply_cz(state, op[1], op[2])
        else:
            raise ValueError(f"unknown gate op {op!r}")
    return state


def prepare_state(
    angles: np.ndarray,
    params: AnsatzParams,
    config: AnsatzConfig,
    layers: int | None = None,
) -> StateVector:
    """Run the re-uploading circuit on |0...0> and return the feature-map state."""
    ops = build_circuit(angles, params, config, layers=layers)
    return apply_circuit(statesim.new_zero_state(config.n_qubits), ops)
