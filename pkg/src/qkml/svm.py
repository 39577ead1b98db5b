"""SVM dual training on precomputed kernels.

`train_smo` is the production solver: sequential minimal optimization with
maximal-violating-pair working-set selection. `solve_dual_reference` is an
independent projected-gradient solver kept solely as a correctness oracle;
the two must agree on the dual objective, which the test suite enforces.
"""

from __future__ import annotations

import hashlib
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPsdKernelWarning, SingleClassError

SUPPORT_THRESHOLD = 1e-8
MODEL_MAGIC = b"QKSV"
MODEL_VERSION = 1


@dataclass(frozen=True)
class SvmModel:
    """Trained dual solution: multipliers, bias, labels, box constant."""

    alpha: np.ndarray
    bias: float
    labels: np.ndarray
    C: float
    training_kernel_fingerprint: str
    support_indices: np.ndarray = field(init=False)

    def __post_init__(self):
        alpha = np.asarray(self.alpha, dtype=float)
        labels = np.asarray(self.labels, dtype=float)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(
            self, "support_indices", np.where(alpha > SUPPORT_THRESHOLD)[0]
        )

    @property
    def n_train(self) -> int:
        return self.alpha.shape[0]


def kernel_fingerprint(kernel: np.ndarray) -> str:
    """SHA-256 of the row-major little-endian float64 bytes of the kernel."""
    data = np.ascontiguousarray(np.asarray(kernel, dtype="<f8"))
    return hashlib.sha256(data.tobytes(order="C")).hexdigest()


def dual_objective(alpha: np.ndarray, kernel: np.ndarray, y: np.ndarray) -> float:
    """Dual value sum(alpha) - 0.5 * alpha' Q alpha with Q = yy' * K (maximized)."""
    v = alpha * y
    return float(alpha.sum() - 0.5 * v @ kernel @ v)


def _check_labels(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if not np.all(np.isin(y, (-1.0, 1.0))):
        raise ValueError("labels must be -1 or +1")
    if len(np.unique(y)) < 2:
        raise SingleClassError(
            "single-class training set: the equality constraint forces alpha = 0"
        )
    return y


def _repair_kernel(kernel: np.ndarray, psd_tol: float = 1e-8) -> np.ndarray:
    """Add diagonal jitter when the kernel is indefinite beyond tolerance."""
    kernel = np.asarray(kernel, dtype=float)
    min_eig = float(np.linalg.eigvalsh(kernel).min())
    if min_eig < -psd_tol:
        jitter = max(0.0, -min_eig) + 1e-10
        warnings.warn(
            f"kernel min eigenvalue {min_eig:.3e}; adding diagonal jitter {jitter:.3e}",
            NonPsdKernelWarning,
            stacklevel=3,
        )
        kernel = kernel + jitter * np.eye(kernel.shape[0])
    return kernel


def _bias_from_gradient(
    alpha: np.ndarray, grad: np.ndarray, y: np.ndarray, C: float
) -> float:
    """Bias from free support vectors, else midpoint of the KKT bounds.

    With G = Q alpha - 1, every free SV satisfies b = -y_i G_i exactly; when
    none are free, b is the midpoint of [max over I_up, min over I_low] of
    the same quantity, the feasible KKT interval.
    """
    neg_yg = -y * grad
    free = (alpha > SUPPORT_THRESHOLD) & (alpha < C - SUPPORT_THRESHOLD)
    if free.any():
        return float(neg_yg[free].mean())
    up = ((y > 0) & (alpha < C - SUPPORT_THRESHOLD)) | ((y < 0) & (alpha > SUPPORT_THRESHOLD))
    low = ((y > 0) & (alpha > SUPPORT_THRESHOLD)) | ((y < 0) & (alpha < C - SUPPORT_THRESHOLD))
    lo = neg_yg[up].max() if up.any() else -np.inf
    hi = neg_yg[low].min() if low.any() else np.inf
    if not np.isfinite(lo):
        return float(hi)
    if not np.isfinite(hi):
        return float(lo)
    return float((lo + hi) / 2.0)


def train_smo(
    kernel: np.ndarray,
    y: np.ndarray,
    C: float,
    tol: float = 1e-3,
    max_iter: int = 10_000,
) -> SvmModel:
    """Solve the kernel SVM dual by SMO on a precomputed Gram matrix.

    Maximizes sum(alpha) - 0.5 alpha' Q alpha subject to 0 <= alpha <= C and
    sum(alpha * y) = 0. Working pairs are the maximal KKT violators, which
    makes runs deterministic; convergence is declared when the violation gap
    drops to `tol`.
    """
    y = _check_labels(y)
    kernel = np.asarray(kernel, dtype=float)
    n = kernel.shape[0]
    if kernel.shape != (n, n) or y.shape[0] != n:
        raise ValueError(f"kernel shape {kernel.shape} does not match {y.shape[0]} labels")
    if C <= 0:
        raise ValueError(f"box constant C must be positive, got {C}")
    kernel = _repair_kernel(kernel)
    fingerprint = kernel_fingerprint(kernel)

    q = np.outer(y, y) * kernel
    alpha = np.zeros(n)
    grad = -np.ones(n)  # grad of 0.5 a'Qa - sum(a)

    for _ in range(max_iter):
        neg_yg = -y * grad
        up = ((y > 0) & (alpha < C - SUPPORT_THRESHOLD)) | ((y < 0) & (alpha > SUPPORT_THRESHOLD))
        low = ((y > 0) & (alpha > SUPPORT_THRESHOLD)) | ((y < 0) & (alpha < C - SUPPORT_THRESHOLD))
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, neg_yg, -np.inf)))
        j = int(np.argmin(np.where(low, neg_yg, np.inf)))
        if neg_yg[i] - neg_yg[j] <= tol:
            break

        # Two-variable subproblem in Platt's error form: E_k = y_k * G_k.
        e_i, e_j = y[i] * grad[i], y[j] * grad[j]
        eta = kernel[i, i] + kernel[j, j] - 2.0 * kernel[i, j]
        eta = max(eta, 1e-12)
        if y[i] != y[j]:
            lo_bound = max(0.0, alpha[j] - alpha[i])
            hi_bound = min(C, C + alpha[j] - alpha[i])
        else:
            lo_bound = max(0.0, alpha[i] + alpha[j] - C)
            hi_bound = min(C, alpha[i] + alpha[j])
        a_j_new = np.clip(alpha[j] + y[j] * (e_i - e_j) / eta, lo_bound, hi_bound)
        delta_j = a_j_new - alpha[j]
        if abs(delta_j) < 1e-15:
            break
        delta_i = -y[i] * y[j] * delta_j
        alpha[i] += delta_i
        alpha[j] = a_j_new
        grad += q[:, i] * delta_i + q[:, j] * delta_j

    bias = _bias_from_gradient(alpha, grad, y, C)
    return SvmModel(alpha=alpha, bias=bias, labels=y, C=C, training_kernel_fingerprint=fingerprint)


def _project_box_hyperplane(v: np.ndarray, y: np.ndarray, C: float) -> np.ndarray:
    """Euclidean projection onto {0 <= a <= C} intersected with {sum(a*y) = 0}.

    The projection is clip(v - nu*y, 0, C) for the multiplier nu solving
    g(nu) = sum(y * clip(v - nu*y, 0, C)) = 0. g is continuous, piecewise
    linear, and non-increasing with kinks only at the 2N box breakpoints, so
    the root is found exactly by sorting breakpoints and interpolating on the
    bracketing segment.
    """
    breakpoints = np.sort(
        np.concatenate([np.where(y > 0, v - C, -v), np.where(y > 0, v, -v + C)])
    )
    g = np.clip(v[None, :] - breakpoints[:, None] * y[None, :], 0.0, C) @ y
    # g starts at +C*n_pos and ends at -C*n_neg, so a sign change exists.
    k = int(np.searchsorted(-g, 0.0, side="left"))
    if k == 0:
        nu = breakpoints[0]
    else:
        g0, g1 = g[k - 1], g[k]
        if g0 > g1:
            nu = breakpoints[k - 1] + (breakpoints[k] - breakpoints[k - 1]) * g0 / (g0 - g1)
        else:
            nu = breakpoints[k]
    return np.clip(v - nu * y, 0.0, C)


def solve_dual_reference(
    kernel: np.ndarray,
    y: np.ndarray,
    C: float,
    iterations: int = 2000,
) -> SvmModel:
    """Projected-gradient ascent on the SVM dual; independent SMO oracle.

    Fixed step 1/lambda_max(Q) keeps the objective non-decreasing; every
    iterate is exactly feasible via the box-plus-hyperplane projection.
    """
    y = _check_labels(y)
    kernel = _repair_kernel(np.asarray(kernel, dtype=float))
    fingerprint = kernel_fingerprint(kernel)
    q = np.outer(y, y) * kernel
    lipschitz = float(np.linalg.eigvalsh(q).max())
    step = 1.0 / max(lipschitz, 1e-12)

    alpha = np.zeros(kernel.shape[0])
    for _ in range(iterations):
        ascent = 1.0 - q @ alpha  # gradient of the maximized dual
        new_alpha = _project_box_hyperplane(alpha + step * ascent, y, C)
        if float(np.abs(new_alpha - alpha).max()) < 1e-14:
            alpha = new_alpha
            break
        alpha = new_alpha

    grad = q @ alpha - 1.0
    bias = _bias_from_gradient(alpha, grad, y, C)
    return SvmModel(alpha=alpha, bias=bias, labels=y, C=C, training_kernel_fingerprint=fingerprint)


def decision_value(model: SvmModel, k_row: np.ndarray) -> float:
    """f(x) = sum_i alpha_i y_i k(x_i, x) + b for one kernel row."""
    k_row = np.asarray(k_row, dtype=float)
    if k_row.shape != (model.n_train,):
        raise ValueError(f"kernel row length {k_row.shape} does not match {model.n_train} training points")
    return float(np.dot(model.alpha * model.labels, k_row) + model.bias)


def decision_values(model: SvmModel, k_rows: np.ndarray) -> np.ndarray:
    """Vectorized decision values for a (n_eval, n_train) kernel block."""
    k_rows = np.atleast_2d(np.asarray(k_rows, dtype=float))
    if k_rows.shape[1] != model.n_train:
        raise ValueError(f"kernel block width {k_rows.shape[1]} does not match {model.n_train}")
    return k_rows @ (model.alpha * model.labels) + model.bias


def predict(model: SvmModel, k_row: np.ndarray) -> int:
    """Sign of the decision value; an exact zero maps to +1."""
    return 1 if decision_value(model, k_row) >= 0.0 else -1


def hinge_loss(model: SvmModel, kernel: np.ndarray, y: np.ndarray) -> float:
    """Total hinge loss sum_i max(0, 1 - y_i f(x_i)) on the given kernel rows."""
    f = decision_values(model, kernel)
    return float(np.maximum(0.0, 1.0 - np.asarray(y, dtype=float) * f).sum())


def save_model(model: SvmModel, path: str) -> None:
    """Binary model dump.

    Layout: magic b"QKSV", one version byte, N as unsigned 64-bit LE,
    C and bias as float64 LE, alpha as N float64 LE, labels as N int8,
    then the 32-byte raw SHA-256 training-kernel fingerprint.
    """
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(bytes([MODEL_VERSION]))
        fh.write(struct.pack("<Q", model.n_train))
        fh.write(struct.pack("<d", model.C))
        fh.write(struct.pack("<d", model.bias))
        fh.write(model.alpha.astype("<f8").tobytes())
        fh.write(model.labels.astype(np.int8).tobytes())
        fh.write(bytes.fromhex(model.training_kernel_fingerprint))


def load_model(path: str) -> SvmModel:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MODEL_MAGIC:
            raise ValueError(f"bad model magic {magic!r}")
        version = fh.read(1)[0]
        if version != MODEL_VERSION:
            raise ValueError(f"unsupported model version {version}")
        (n,) = struct.unpack("<Q", fh.read(8))
        (c_value,) = struct.unpack("<d", fh.read(8))
        (bias,) = struct.unpack("<d", fh.read(8))
        alpha = np.frombuffer(fh.read(8 * n), dtype="<f8").copy()
        labels = np.frombuffer(fh.read(n), dtype=np.int8).astype(float)
        fingerprint = fh.read(32).hex()
    return SvmModel(alpha=alpha, bias=bias, labels=labels, C=c_value,
                    training_kernel_fingerprint=fingerprint)


def model_summary(model: SvmModel) -> str:
    """Human-readable text dump of a trained model."""
    lines = [
        "svm model",
        f"  training points: {model.n_train}",
        f"  support vectors: {len(model.support_indices)}",
        f"  box constant C:  {model.C:g}",
        f"  bias:            {model.bias:.12g}",
        f"  kernel sha256:   {model.training_kernel_fingerprint}",
        "  alpha (support only):",
    ]
    for i in model.support_indices:
        lines.append(f"    [{i}] alpha={model.alpha[i]:.12g} y={model.labels[i]:+.0f}")
    return "\n".join(lines) + "\n"
