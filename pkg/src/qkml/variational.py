"""Variational kernel-parameter training: gradient descent on a regularized
SVM loss with parameter-shift kernel gradients.

The composite loss is L(theta) = L_svm(k_theta) + (lambda/2)||theta||^2. The
default L_svm surrogate is the training-set hinge loss of the inner SVM; the
negative dual objective is available as an alternative surrogate for which
the envelope gradient is exact. Gradients treat the inner dual variables as
constants (they are re-solved every outer iteration), and the regularizer
contributes lambda * theta.

With `shots` set, only the parameter-shift kernel evaluations are sampled;
the inner SVM and the recorded loss use exact kernels, so the gradient noise
is zero-mean exactly as in the sigma^2 model.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass

import numpy as np

from .ansatz import AnsatzConfig, AnsatzParams
from .errors import NumericalError, StepSizeWarning
from .qkernel import all_param_indices, gram_gradient_param_shift, gram_matrix
from .seeding import derive_seed
from .svm import SvmModel, decision_values, dual_objective, train_smo

SCHEDULES = ("constant", "inverse_sqrt")
SURROGATES = ("hinge", "dual")


@dataclass(frozen=True)
class TrainConfig:
    """Outer-loop settings for variational kernel training."""

    learning_rate: float
    iterations: int
    regularization: float = 0.0
    svm_C: float = 1.0
    schedule: str = "constant"
    shots: int | None = None
    seed: int = 0
    surrogate: str = "hinge"

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ValueError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.iterations < 1:
            raise ValueError(f"iterations must be >= 1, got {self.iterations}")
        if self.schedule not in SCHEDULES:
            raise ValueError(f"unknown schedule {self.schedule!r}; expected {SCHEDULES}")
        if self.surrogate not in SURROGATES:
            raise ValueError(f"unknown surrogate {self.surrogate!r}; expected {SURROGATES}")
        if self.regularization < 0:
            raise ValueError("regularization must be non-negative")


@dataclass(frozen=True)
class TrainTrace:
    """Per-iteration record: loss and gradient norm at theta_t, t = 0..T-1."""

    losses: np.ndarray
    grad_norms: np.ndarray
    final_params: AnsatzParams

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "loss", "grad_norm"])
            for t, (loss, gn) in enumerate(zip(self.losses, self.grad_norms)):
                writer.writerow([t, f"{loss:.17g}", f"{gn:.17g}"])


def params_from_flat(flat: np.ndarray, config: AnsatzConfig) -> AnsatzParams:
    """Inverse of AnsatzParams.flat() for the given circuit shape."""
    half = config.layers * config.n_qubits
    if flat.shape != (2 * half,):
        raise ValueError(f"flat parameter vector must have length {2 * half}")
    shape = (config.layers, config.n_qubits)
    return AnsatzParams(flat[:half].reshape(shape), flat[half:].reshape(shape))


def smoothness_bound(n_samples: int, svm_C: float, regularization: float) -> float:
    """Smoothness constant beta = 4*N*C^2 + lambda of the composite loss."""
    if n_samples < 1:
        raise ValueError("sample count must be >= 1")
    return 4.0 * n_samples * svm_C**2 + regularization


def _fit_inner_svm(kernel: np.ndarray, y: np.ndarray, svm_C: float) -> SvmModel:
    return train_smo(kernel, y, C=svm_C, tol=1e-6, max_iter=50_000)


def _surrogate_loss(model: SvmModel, kernel: np.ndarray, y: np.ndarray, surrogate: str) -> float:
    if surrogate == "hinge":
        f = decision_values(model, kernel)
        return float(np.maximum(0.0, 1.0 - y * f).sum())
    return -dual_objective(model.alpha, kernel, y)


def composite_loss(
    params: AnsatzParams,
    X: np.ndarray,
    y: np.ndarray,
    config: AnsatzConfig,
    svm_C: float,
    regularization: float,
    surrogate: str = "hinge",
) -> float:
    """Train the inner SVM on k_theta and return L_svm + (lambda/2)||theta||^2."""
    y = np.asarray(y, dtype=float)
    kernel = gram_matrix(X, params, config)
    model = _fit_inner_svm(kernel, y, svm_C)
    data_term = _surrogate_loss(model, kernel, y, surrogate)
    return data_term + 0.5 * regularization * params.norm_sq()


def loss_gradient(
    params: AnsatzParams,
    X: np.ndarray,
    y: np.ndarray,
    config: AnsatzConfig,
    svm_C: float,
    regularization: float,
    surrogate: str = "hinge",
    shots: int | None = None,
    seed: int = 0,
) -> np.ndarray:
    """Envelope-style gradient over all 2nL parameters, flat() ordering.

    The inner dual variables come from an exact-kernel solve and are held
    fixed; each dK/dtheta entry uses the two-point parameter-shift rule,
    sampled with `shots` measurements when set.
    """
    y = np.asarray(y, dtype=float)
    kernel = gram_matrix(X, params, config)
    model = _fit_inner_svm(kernel, y, svm_C)
    coeff = model.alpha * y

    if surrogate == "hinge":
        f = decision_values(model, kernel)
        active = (1.0 - y * f) > 0.0  # flat side of the hinge at the kink
        weights = np.where(active, -y, 0.0)

    grad = np.empty(2 * config.layers * config.n_qubits)
    for p, index in enumerate(all_param_indices(config)):
        dk = gram_gradient_param_shift(
            X, params, config, index, shots=shots,
            seed=derive_seed(seed, "shift", p) if shots is not None else 0,
        )
        if surrogate == "hinge":
            # d/dtheta sum_i hinge_i with f_i = sum_j coeff_j k(x_j, x_i) + b
            grad[p] = float(weights @ (dk @ coeff))
        else:
            # d/dtheta [-D(alpha*)] = +0.5 * sum_ij coeff_i coeff_j dK_ij
            grad[p] = 0.5 * float(coeff @ dk @ coeff)
    return grad + regularization * params.flat()


def optimize(
    params0: AnsatzParams,
    X: np.ndarray,
    y: np.ndarray,
    config: AnsatzConfig,
    train_config: TrainConfig,
) -> tuple[AnsatzParams, TrainTrace]:
    """Run theta_{t+1} = theta_t - eta_t * g_t for T iterations.

    The trace records loss and gradient norm at theta_t before each update.
    The inverse-sqrt schedule uses eta_t = eta_0 / sqrt(t + 1). A non-finite
    loss aborts with NumericalError carrying the partial trace.
    """
    tc = train_config
    n_samples = np.atleast_2d(np.asarray(X)).shape[0]
    if tc.schedule == "constant":
        beta = smoothness_bound(n_samples, tc.svm_C, tc.regularization)
        if tc.learning_rate > 1.0 / beta:
            warnings.warn(
                f"constant learning rate {tc.learning_rate:g} exceeds 1/beta = {1.0 / beta:g}",
                StepSizeWarning,
                stacklevel=2,
            )

    params = params0
    losses: list[float] = []
    grad_norms: list[float] = []
    for t in range(tc.iterations):
        loss = composite_loss(params, X, y, config, tc.svm_C, tc.regularization, tc.surrogate)
        if not np.isfinite(loss):
            err = NumericalError(f"non-finite loss {loss!r} at iteration {t}")
            err.trace = TrainTrace(np.array(losses), np.array(grad_norms), params)
            raise err
        grad = loss_gradient(
            params, X, y, config, tc.svm_C, tc.regularization, tc.surrogate,
            shots=tc.shots, seed=derive_seed(tc.seed, "iter", t),
        )
        losses.append(loss)
        grad_norms.append(float(np.linalg.norm(grad)))
        eta = tc.learning_rate if tc.schedule == "constant" else tc.learning_rate / np.sqrt(t + 1.0)
        params = params_from_flat(params.flat() - eta * grad, config)
    return params, TrainTrace(np.array(losses), np.array(grad_norms), params)
