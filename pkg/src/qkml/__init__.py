"""Quantum-kernel machine learning toolkit.

Classically simulates shallow data re-uploading circuits to build quantum
kernels and explicit quantum features, trains SVM classifiers on them, and
evaluates with ROC-driven threshold policies.
"""

from .ansatz import AnsatzConfig, AnsatzParams, FeatureRanges, encode_features, prepare_state
from .qkernel import (
    cross_gram,
    gram_matrix,
    kernel_gradient_param_shift,
    kernel_value,
    margin_diagnostics,
    pairwise_quantum_distance,
)
from .statesim import (
    MeasurementCounts,
    StateVector,
    apply_cz,
    apply_hadamard,
    apply_ry,
    apply_rz,
    expectation_pauli_z,
    inner_product,
    new_zero_state,
    sample_measurements,
)
from .svm import SvmModel, decision_value, predict, solve_dual_reference, train_smo

__version__ = "0.1.0"

__all__ = [
    "AnsatzConfig",
    "AnsatzParams",
    "FeatureRanges",
    "MeasurementCounts",
    "StateVector",
    "SvmModel",
    "apply_cz",
    "apply_hadamard",
    "apply_ry",
    "apply_rz",
    "cross_gram",
    "decision_value",
    "encode_features",
    "expectation_pauli_z",
    "gram_matrix",
    "inner_product",
    "kernel_gradient_param_shift",
    "kernel_value",
    "margin_diagnostics",
    "new_zero_state",
    "pairwise_quantum_distance",
    "predict",
    "prepare_state",
    "sample_measurements",
    "solve_dual_reference",
    "train_smo",
    "__version__",
]
