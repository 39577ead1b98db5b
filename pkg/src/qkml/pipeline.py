"""End-to-end experiment orchestration: load CSV, preprocess, split, run the
selected model suite, evaluate with ROC-driven thresholds, and emit reports,
delimited outputs, figures, and binary artifacts under one output directory.

Every random quantity derives from the manifest seed through named
sub-seeds, so reruns of the same config produce byte-identical metric files.
Timing is written separately (timings.json) because it is the one
legitimately non-deterministic output.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .ansatz import AnsatzConfig, AnsatzParams, random_params
from .data import (
    DatasetSpec,
    RawDataset,
    SplitIndices,
    load_csv,
    preprocess,
    preprocessor_summary,
    stratified_split,
)
from .errors import CapacityError, ConfigError, QkmlError
from .kernels import classical_kernel, quantum_kernel_evaluator
from .metrics import (
    classification_report,
    normalize_scores,
    render_report,
    report_to_dict,
    roc_curve,
    roc_to_csv,
    select_threshold,
)
from .nystrom import approx_gram, build_nystrom, dump_nystrom, extend_cross, sample_landmarks
from .plotting import save_comparison_plot, save_roc_plot, save_trace_plot
from .qfe import FeatureStandardizer, QfeConfig, export_features_csv, qfe_transform
from .qkernel import cross_gram, cross_gram_shots, dump_gram, dump_gram_csv, gram_matrix, gram_matrix_shots
from .seeding import derive_seed
from .statesim import DEFAULT_QUBIT_CAP
from .svm import decision_values, model_summary, save_model, train_smo
from .variational import TrainConfig, optimize

CLASSICAL_MODELS = ("classical-linear", "classical-rbf", "classical-polynomial")
QUANTUM_MODELS = ("quantum-kernel", "qfe", "nystrom")
HARDWARE_MODELS = ("quantum-hardware-linear", "quantum-hardware-rbf",
                   "quantum-hardware-polynomial")
ALL_MODELS = CLASSICAL_MODELS + QUANTUM_MODELS + HARDWARE_MODELS

KERNEL_MODES = ("exact", "shots")


class StageFailure(QkmlError):
    """Wraps the first error raised inside a pipeline stage."""

    def __init__(self, stage: str, original: BaseException):
        super().__init__(f"stage {stage!r} failed: {original}")
        self.stage = stage
        self.original = original


@dataclass(frozen=True)
class PipelineConfig:
    csv_path: str
    spec_path: str
    seed: int = 0
    proportions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    models: tuple[str, ...] = ("classical-linear", "quantum-kernel")
    ansatz_layers: int = 2
    ansatz_entangle: str = "chain"
    ansatz_hadamard: bool = True
    ansatz_n_qubits: int | None = None
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    svm_max_iter: int = 10_000
    rbf_bandwidth: float | None = None  # default 1/d at run time
    poly_degree: int = 3
    poly_coef0: float = 1.0
    qfe_slices: int | None = None  # default min(2, layers)
    qfe_target_dim: int = 128
    nystrom_landmarks: int = 8
    nystrom_strategy: str = "uniform"
    variational_enabled: bool = False
    variational_learning_rate: float = 0.02
    variational_iterations: int = 25
    variational_regularization: float = 0.01
    variational_schedule: str = "constant"
    variational_shots: int | None = None
    variational_surrogate: str = "hinge"
    kernel_mode: str = "exact"
    kernel_shots: int = 1024
    threshold_policy: str = "youden"
    threshold_floor: float | None = None
    c_grid: tuple[float, ...] = ()

    def __post_init__(self):
        for model in self.models:
            if model not in ALL_MODELS:
                raise ConfigError(f"unknown model {model!r}; expected one of {ALL_MODELS}")
        if self.kernel_mode not in KERNEL_MODES:
            raise ConfigError(f"unknown kernel mode {self.kernel_mode!r}")
        if self.threshold_policy not in ("youden", "recall_first", "precision_first"):
            raise ConfigError(f"unknown threshold policy {self.threshold_policy!r}")
        if self.threshold_policy != "youden" and self.threshold_floor is None:
            raise ConfigError(f"policy {self.threshold_policy} requires a floor")

    @classmethod
    def from_yaml(cls, path: str, overrides: dict | None = None) -> "PipelineConfig":
        try:
            with open(path) as fh:
                doc = yaml.safe_load(fh) or {}
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if overrides:
            for dotted, value in overrides.items():
                node = doc
                parts = dotted.split(".")
                for part in parts[:-1]:
                    node = node.setdefault(part, {})
                node[parts[-1]] = value
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "PipelineConfig":
        def section(name):
            value = doc.get(name) or {}
            if not isinstance(value, dict):
                raise ConfigError(f"config section {name!r} must be a mapping")
            return value

        dataset = section("dataset")
        if "csv" not in dataset or "spec" not in dataset:
            raise ConfigError("config needs dataset.csv and dataset.spec paths")
        splits = section("splits")
        ansatz = section("ansatz")
        svm = section("svm")
        classical = section("classical")
        qfe = section("qfe")
        nystrom = section("nystrom")
        variational = section("variational")
        kernel = section("kernel")
        threshold = section("threshold")
        tune = section("tune")
        return cls(
            csv_path=str(dataset["csv"]),
            spec_path=str(dataset["spec"]),
            seed=int(doc.get("seed", 0)),
            proportions=(
                float(splits.get("train", 0.70)),
                float(splits.get("validation", 0.15)),
                float(splits.get("test", 0.15)),
            ),
            models=tuple(doc.get("models", ["classical-linear", "quantum-kernel"])),
            ansatz_layers=int(ansatz.get("layers", 2)),
            ansatz_entangle=str(ansatz.get("entangle", "chain")),
            ansatz_hadamard=bool(ansatz.get("hadamard_init", True)),
            ansatz_n_qubits=(None if ansatz.get("n_qubits") is None
                             else int(ansatz["n_qubits"])),
            svm_C=float(svm.get("C", 1.0)),
            svm_tol=float(svm.get("tol", 1e-3)),
            svm_max_iter=int(svm.get("max_iter", 10_000)),
            rbf_bandwidth=(None if classical.get("rbf_bandwidth") is None
                           else float(classical["rbf_bandwidth"])),
            poly_degree=int(classical.get("poly_degree", 3)),
            poly_coef0=float(classical.get("poly_coef0", 1.0)),
            qfe_slices=(None if qfe.get("slices") is None else int(qfe["slices"])),
            qfe_target_dim=int(qfe.get("target_dim", 128)),
            nystrom_landmarks=int(nystrom.get("landmarks", 8)),
            nystrom_strategy=str(nystrom.get("strategy", "uniform")),
            variational_enabled=bool(variational.get("enabled", False)),
            variational_learning_rate=float(variational.get("learning_rate", 0.02)),
            variational_iterations=int(variational.get("iterations", 25)),
            variational_regularization=float(variational.get("regularization", 0.01)),
            variational_schedule=str(variational.get("schedule", "constant")),
            variational_shots=(None if variational.get("shots") is None
                               else int(variational["shots"])),
            variational_surrogate=str(variational.get("surrogate", "hinge")),
            kernel_mode=str(kernel.get("mode", "exact")),
            kernel_shots=int(kernel.get("shots", 1024)),
            threshold_policy=str(threshold.get("policy", "youden")),
            threshold_floor=(None if threshold.get("floor") is None
                             else float(threshold["floor"])),
            c_grid=tuple(float(c) for c in tune.get("c_grid", [])),
        )

    def to_dict(self) -> dict:
        return {
            "dataset": {"csv": self.csv_path, "spec": self.spec_path},
            "seed": self.seed,
            "splits": {"train": self.proportions[0], "validation": self.proportions[1],
                       "test": self.proportions[2]},
            "models": list(self.models),
            "ansatz": {"layers": self.ansatz_layers, "entangle": self.ansatz_entangle,
                       "hadamard_init": self.ansatz_hadamard,
                       "n_qubits": self.ansatz_n_qubits},
            "svm": {"C": self.svm_C, "tol": self.svm_tol, "max_iter": self.svm_max_iter},
            "classical": {"rbf_bandwidth": self.rbf_bandwidth,
                          "poly_degree": self.poly_degree, "poly_coef0": self.poly_coef0},
            "qfe": {"slices": self.qfe_slices, "target_dim": self.qfe_target_dim},
            "nystrom": {"landmarks": self.nystrom_landmarks,
                        "strategy": self.nystrom_strategy},
            "variational": {
                "enabled": self.variational_enabled,
                "learning_rate": self.variational_learning_rate,
                "iterations": self.variational_iterations,
                "regularization": self.variational_regularization,
                "schedule": self.variational_schedule,
                "shots": self.variational_shots,
                "surrogate": self.variational_surrogate,
            },
            "kernel": {"mode": self.kernel_mode, "shots": self.kernel_shots},
            "threshold": {"policy": self.threshold_policy, "floor": self.threshold_floor},
            "tune": {"c_grid": list(self.c_grid)},
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


@dataclass
class ExperimentResult:
    out_dir: str
    manifest: dict
    model_metrics: dict[str, dict]
    timings: dict[str, float] = field(default_factory=dict)


def _dump_json(doc: dict, path: Path) -> None:
    path.write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n")


class _Timer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    def run(self, stage: str, fn):
        start = time.perf_counter()
        try:
            result = fn()
        except StageFailure:
            raise
        except BaseException as exc:
            raise StageFailure(stage, exc) from exc
        finally:
            self.timings[stage] = time.perf_counter() - start
        return result


def _resolve_ansatz(config: PipelineConfig, n_features: int) -> AnsatzConfig:
    n_qubits = config.ansatz_n_qubits if config.ansatz_n_qubits is not None else n_features
    if n_qubits > n_features:
        raise ConfigError(
            f"ansatz n_qubits {n_qubits} exceeds the {n_features} encoded features"
        )
    if n_qubits > DEFAULT_QUBIT_CAP:
        raise CapacityError(
            f"{n_qubits} encoded features exceed the {DEFAULT_QUBIT_CAP}-qubit cap; "
            "reduce features or set ansatz.n_qubits with feature folding"
        )
    return AnsatzConfig(
        n_qubits=n_qubits,
        layers=config.ansatz_layers,
        entangle_pattern=config.ansatz_entangle,
        hadamard_init=config.ansatz_hadamard,
        feature_folding=n_qubits < n_features,
    )


def _select_C(config: PipelineConfig, k_train, y_train, k_val, y_val) -> float:
    """Validation grid search over C (the simplified model-selection loop);
    ties prefer the smaller C. Empty grid keeps the configured C."""
    if not config.c_grid:
        return config.svm_C
    best = None
    for c_value in sorted(config.c_grid):
        model = train_smo(k_train, y_train, C=c_value, tol=config.svm_tol,
                          max_iter=config.svm_max_iter)
        accuracy = float(np.mean(np.sign(decision_values(model, k_val)) == y_val))
        if best is None or accuracy > best[0] + 1e-12:
            best = (accuracy, c_value)
    return best[1]


@dataclass
class _SuiteContext:
    config: PipelineConfig
    raw: RawDataset
    angles: np.ndarray
    labels: np.ndarray
    split: SplitIndices
    ansatz: AnsatzConfig
    theta: AnsatzParams
    out_dir: Path
    artifacts: list[str]

    @property
    def y_train(self):
        return self.labels[self.split.train]

    @property
    def y_val(self):
        return self.labels[self.split.validation]

    @property
    def y_test(self):
        return self.labels[self.split.test]


def _model_kernels(name: str, ctx: _SuiteContext) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """Train Gram plus validation/test cross blocks, and model artifacts."""
    config = ctx.config
    a_train = ctx.angles[ctx.split.train]
    a_val = ctx.angles[ctx.split.validation]
    a_test = ctx.angles[ctx.split.test]
    extras: dict = {}

    if name in CLASSICAL_MODELS:
        kind = name.removeprefix("classical-")
        if kind == "rbf":
            bandwidth = config.rbf_bandwidth
            if bandwidth is None:
                bandwidth = 1.0 / ctx.angles.shape[1]
            evaluator = classical_kernel("rbf", bandwidth=bandwidth)
        elif kind == "polynomial":
            evaluator = classical_kernel("polynomial", degree=config.poly_degree,
                                         coef0=config.poly_coef0)
        else:
            evaluator = classical_kernel("linear")
        return evaluator(a_train, a_train), evaluator(a_val, a_train), \
            evaluator(a_test, a_train), extras

    if name == "quantum-kernel":
        if config.kernel_mode == "shots":
            shot_seed = derive_seed(config.seed, "kernel-shots")
            k_train = gram_matrix_shots(a_train, ctx.theta, ctx.ansatz,
                                        config.kernel_shots, shot_seed)
            k_val = cross_gram_shots(a_val, a_train, ctx.theta, ctx.ansatz,
                                     config.kernel_shots, derive_seed(shot_seed, "val"))
            k_test = cross_gram_shots(a_test, a_train, ctx.theta, ctx.ansatz,
                                      config.kernel_shots, derive_seed(shot_seed, "test"))
        else:
            k_train = gram_matrix(a_train, ctx.theta, ctx.ansatz)
            k_val = cross_gram(a_val, a_train, ctx.theta, ctx.ansatz)
            k_test = cross_gram(a_test, a_train, ctx.theta, ctx.ansatz)
        extras["gram"] = k_train
        return k_train, k_val, k_test, extras

    if name == "qfe":
        slices = config.qfe_slices if config.qfe_slices is not None \
            else min(2, ctx.ansatz.layers)
        qfe_config = QfeConfig(ansatz=ctx.ansatz, params=ctx.theta, slices=slices,
                               target_dim=config.qfe_target_dim)
        feats = qfe_transform(ctx.angles, qfe_config)
        scaler = FeatureStandardizer.fit(feats[ctx.split.train], qfe_config)
        feats = scaler.transform(feats)
        f_train = feats[ctx.split.train]
        extras["qfe_config"] = qfe_config
        extras["qfe_features"] = f_train
        evaluator = classical_kernel("linear")
        return evaluator(f_train, f_train), \
            evaluator(feats[ctx.split.validation], f_train), \
            evaluator(feats[ctx.split.test], f_train), extras

    if name == "nystrom":
        evaluator = quantum_kernel_evaluator(ctx.theta, ctx.ansatz)
        n_train = a_train.shape[0]
        m = min(config.nystrom_landmarks, n_train)
        pilot = evaluator(a_train, a_train) if config.nystrom_strategy == "leverage" else None
        landmarks = sample_landmarks(n_train, m, config.nystrom_strategy,
                                     seed=derive_seed(config.seed, "landmarks"),
                                     kernel=pilot)
        ny_model = build_nystrom(a_train, landmarks, evaluator)
        k_train = approx_gram(ny_model)
        k_val = extend_cross(ny_model, evaluator(a_val, a_train[landmarks]))
        k_test = extend_cross(ny_model, evaluator(a_test, a_train[landmarks]))
        extras["nystrom_model"] = ny_model
        extras["gram"] = k_train
        return k_train, k_val, k_test, extras

    if name in HARDWARE_MODELS:
        raise ConfigError(
            f"model {name!r} is a hardware-baseline slot; hardware execution is "
            "not supported by this toolkit"
        )
    raise ConfigError(f"unknown model {name!r}")


def _evaluate_model(name: str, ctx: _SuiteContext) -> dict:
    config = ctx.config
    model_dir = ctx.out_dir / name
    model_dir.mkdir(parents=True, exist_ok=True)

    k_train, k_val, k_test, extras = _model_kernels(name, ctx)
    c_value = _select_C(config, k_train, ctx.y_train, k_val, ctx.y_val)
    model = train_smo(k_train, ctx.y_train, C=c_value, tol=config.svm_tol,
                      max_iter=config.svm_max_iter)

    scores_train = decision_values(model, k_train)
    scores_val = decision_values(model, k_val)
    scores_test = decision_values(model, k_test)

    # raw-score ROC on the held-out test split
    curve_test = roc_curve(scores_test, ctx.y_test)

    # decision values normalized on the validation split carry the 0.5 scale
    norm_val = normalize_scores(scores_val, scores_val)
    norm_test = normalize_scores(scores_test, scores_val)
    default_report = classification_report(norm_test, ctx.y_test, 0.5)

    curve_val = roc_curve(norm_val, ctx.y_val)
    policy_threshold = select_threshold(curve_val, norm_val, ctx.y_val,
                                        config.threshold_policy,
                                        floor=config.threshold_floor)
    if not np.isfinite(policy_threshold):
        # +/- inf sentinel selected: clamp to the normalized score scale
        policy_threshold = 1.0 if policy_threshold > 0 else 0.0
    policy_report = classification_report(norm_test, ctx.y_test, policy_threshold)

    train_accuracy = float(np.mean(np.sign(scores_train) == ctx.y_train))

    metrics_doc = {
        "model": name,
        "svm_C": c_value,
        "train_accuracy": train_accuracy,
        "test_auc": curve_test.auc,
        "default_threshold": 0.5,
        "default": report_to_dict(default_report),
        "policy": {
            "name": config.threshold_policy,
            "floor": config.threshold_floor,
            "threshold": policy_threshold,
            "report": report_to_dict(policy_report),
        },
        "kernel_fingerprint": model.training_kernel_fingerprint,
    }

    def emit(rel: str, writer) -> None:
        path = model_dir / rel
        writer(str(path))
        ctx.artifacts.append(str(path.relative_to(ctx.out_dir)))

    emit("metrics.json", lambda p: _dump_json(metrics_doc, Path(p)))
    emit("report.txt", lambda p: Path(p).write_text(
        f"model: {name}\ndefault threshold 0.5 on normalized test scores\n\n"
        + render_report(default_report)
        + f"\npolicy {config.threshold_policy}"
        + (f" (floor {config.threshold_floor})" if config.threshold_floor is not None else "")
        + f" selected threshold {policy_threshold:.6f}\n\n"
        + render_report(policy_report)
    ))
    emit("roc.csv", lambda p: roc_to_csv(curve_test, p))
    tp_rate = policy_report.positive.recall
    fp_rate = 1.0 - policy_report.negative.recall
    emit("roc.png", lambda p: save_roc_plot(
        curve_test, p, title=f"{name} test ROC",
        operating_points={"policy point": (fp_rate, tp_rate)},
    ))
    emit("model.qksv", lambda p: save_model(model, p))
    emit("model.txt", lambda p: Path(p).write_text(model_summary(model)))
    if "gram" in extras:
        emit("gram.qkgm", lambda p: dump_gram(extras["gram"], p))
        emit("gram.csv", lambda p: dump_gram_csv(extras["gram"], p))
    if "nystrom_model" in extras:
        emit("nystrom.qkny", lambda p: dump_nystrom(extras["nystrom_model"], p))
    if "qfe_config" in extras:
        emit("qfe_features.csv", lambda p: export_features_csv(
            extras["qfe_features"], extras["qfe_config"], p))
    return metrics_doc


def run_experiment(config: PipelineConfig, out_dir: str) -> ExperimentResult:
    """Execute the full pipeline; see the module docstring for artifacts.

    Any stage failure raises StageFailure naming the stage, after persisting
    the partial manifest and timings gathered so far.
    """
    out_path = Path(out_dir)
    out_path.mkdir(parents=True, exist_ok=True)
    timer = _Timer()
    artifacts: list[str] = []
    model_metrics: dict[str, dict] = {}

    manifest = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "seed": config.seed,
        "toolkit_version": __version__,
    }

    try:
        spec = timer.run("load", lambda: DatasetSpec.from_yaml(config.spec_path))
        raw = timer.run("load-csv", lambda: load_csv(config.csv_path, spec))
        split = timer.run("split", lambda: stratified_split(
            raw.labels, config.proportions, seed=derive_seed(config.seed, "split")))
        angles, preprocessor = timer.run(
            "preprocess", lambda: preprocess(raw, spec, split.train))

        ansatz = _resolve_ansatz(config, preprocessor.n_features)
        theta = random_params(ansatz, seed=derive_seed(config.seed, "theta"))
        trace = None
        if config.variational_enabled:
            train_config = TrainConfig(
                learning_rate=config.variational_learning_rate,
                iterations=config.variational_iterations,
                regularization=config.variational_regularization,
                svm_C=config.svm_C,
                schedule=config.variational_schedule,
                shots=config.variational_shots,
                seed=derive_seed(config.seed, "variational"),
                surrogate=config.variational_surrogate,
            )
            theta, trace = timer.run("variational", lambda: optimize(
                theta, angles[split.train], raw.labels[split.train], ansatz, train_config))

        ctx = _SuiteContext(config=config, raw=raw, angles=angles, labels=raw.labels,
                            split=split, ansatz=ansatz, theta=theta,
                            out_dir=out_path, artifacts=artifacts)

        split.to_json(str(out_path / "splits.json"))
        artifacts.append("splits.json")
        _dump_json(preprocessor_summary(preprocessor), out_path / "preprocessor.json")
        artifacts.append("preprocessor.json")
        if trace is not None:
            trace.to_csv(str(out_path / "variational_trace.csv"))
            save_trace_plot(trace, str(out_path / "variational_trace.png"))
            artifacts.extend(["variational_trace.csv", "variational_trace.png"])

        for name in config.models:
            model_metrics[name] = timer.run(
                f"model:{name}", lambda name=name: _evaluate_model(name, ctx))

        def comparison():
            summary = {
                name: {
                    "accuracy": doc["default"]["accuracy"],
                    "precision": doc["default"]["positive.precision"],
                    "recall": doc["default"]["positive.recall"],
                    "f1": doc["default"]["positive.f1"],
                }
                for name, doc in model_metrics.items()
            }
            save_comparison_plot(summary, str(out_path / "comparison.png"))
            artifacts.append("comparison.png")

        timer.run("emit", comparison)
    except StageFailure as failure:
        manifest["failed_stage"] = failure.stage
        manifest["error"] = str(failure.original)
        manifest["artifacts"] = sorted(artifacts)
        _dump_json(manifest, out_path / "manifest.json")
        _dump_json({k: round(v, 6) for k, v in timer.timings.items()},
                   out_path / "timings.json")
        raise

    manifest["dataset"] = {
        "n_rows": raw.n_rows,
        "n_features": preprocessor.n_features,
        "n_qubits": ansatz.n_qubits,
    }
    manifest["artifacts"] = sorted(artifacts) + ["manifest.json"]
    _dump_json(manifest, out_path / "manifest.json")
    _dump_json({k: round(v, 6) for k, v in timer.timings.items()},
               out_path / "timings.json")
    return ExperimentResult(out_dir=str(out_path), manifest=manifest,
                            model_metrics=model_metrics, timings=timer.timings)
