import itertools
import json
import warnings

import numpy as np
import pytest
import yaml

from qkml.data import make_mixed, make_xor_checkerboard
from qkml.errors import ConfigError
from qkml.pipeline import PipelineConfig, StageFailure, run_experiment

pytestmark = pytest.mark.filterwarnings(
    "ignore::qkml.errors.NonPsdKernelWarning",
    "ignore::qkml.errors.ConstantFeatureWarning",
)


@pytest.fixture(scope="module")
def mixed_dataset(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("mixed")
    ds = make_mixed(120, seed=3)
    ds.write(str(tmp / "data.csv"), str(tmp / "spec.yaml"))
    return str(tmp / "data.csv"), str(tmp / "spec.yaml")


@pytest.fixture(scope="module")
def xor_dataset(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("xor")
    ds = make_xor_checkerboard(400, seed=11)
    ds.write(str(tmp / "data.csv"), str(tmp / "spec.yaml"))
    return str(tmp / "data.csv"), str(tmp / "spec.yaml")


class TestPipelineConfig:
    def test_from_yaml_with_overrides(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        doc = {
            "dataset": {"csv": csv_path, "spec": spec_path},
            "seed": 4,
            "models": ["classical-linear"],
            "svm": {"C": 2.0},
        }
        path = tmp_path / "config.yaml"
        path.write_text(yaml.safe_dump(doc))
        config = PipelineConfig.from_yaml(str(path), overrides={"svm.C": 5.0, "seed": 9})
        assert config.svm_C == 5.0
        assert config.seed == 9
        assert config.models == ("classical-linear",)

    def test_unknown_model_rejected(self, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        with pytest.raises(ConfigError, match="unknown model"):
            PipelineConfig(csv_path=csv_path, spec_path=spec_path, models=("svm-primal",))

    def test_policy_floor_required(self, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        with pytest.raises(ConfigError, match="floor"):
            PipelineConfig(csv_path=csv_path, spec_path=spec_path,
                           threshold_policy="recall_first")

    def test_hash_stable_and_sensitive(self, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        a = PipelineConfig(csv_path=csv_path, spec_path=spec_path, seed=1)
        b = PipelineConfig(csv_path=csv_path, spec_path=spec_path, seed=1)
        c = PipelineConfig(csv_path=csv_path, spec_path=spec_path, seed=2)
        assert a.config_hash() == b.config_hash() != c.config_hash()


class TestRunExperiment:
    def test_artifacts_exist_and_manifest_complete(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        config = PipelineConfig(
            csv_path=csv_path, spec_path=spec_path, seed=5,
            models=("classical-linear", "quantum-kernel"), qfe_target_dim=32)
        result = run_experiment(config, str(tmp_path / "out"))
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        for rel in manifest["artifacts"]:
            assert (tmp_path / "out" / rel).exists(), rel
        assert manifest["config_hash"] == config.config_hash()
        assert (tmp_path / "out" / "timings.json").exists()
        assert (tmp_path / "out" / "comparison.png").exists()
        assert set(result.model_metrics) == {"classical-linear", "quantum-kernel"}

    def test_rerun_byte_identical_metrics(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        config = PipelineConfig(
            csv_path=csv_path, spec_path=spec_path, seed=9,
            models=("classical-rbf", "quantum-kernel"))
        run_experiment(config, str(tmp_path / "a"))
        run_experiment(config, str(tmp_path / "b"))
        compare = [
            "manifest.json", "splits.json", "preprocessor.json",
            "classical-rbf/metrics.json", "classical-rbf/report.txt",
            "classical-rbf/roc.csv", "quantum-kernel/metrics.json",
            "quantum-kernel/report.txt", "quantum-kernel/roc.csv",
            "quantum-kernel/gram.qkgm", "quantum-kernel/model.qksv",
        ]
        for rel in compare:
            assert (tmp_path / "a" / rel).read_bytes() == (tmp_path / "b" / rel).read_bytes(), rel

    def test_all_model_kinds_run(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        config = PipelineConfig(
            csv_path=csv_path, spec_path=spec_path, seed=5,
            models=("classical-linear", "classical-rbf", "classical-polynomial",
                    "quantum-kernel", "qfe", "nystrom"),
            qfe_target_dim=32, nystrom_landmarks=6)
        result = run_experiment(config, str(tmp_path / "out"))
        assert len(result.model_metrics) == 6
        for doc in result.model_metrics.values():
            assert 0.0 <= doc["test_auc"] <= 1.0
            assert 0.0 <= doc["default"]["accuracy"] <= 1.0

    def test_hardware_slot_unsupported(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        config = PipelineConfig(
            csv_path=csv_path, spec_path=spec_path,
            models=("quantum-hardware-linear",))
        with pytest.raises(StageFailure, match="hardware"):
            run_experiment(config, str(tmp_path / "out"))
        # partial manifest persisted with the failed stage name
        manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
        assert manifest["failed_stage"] == "model:quantum-hardware-linear"

    def test_missing_csv_fails_at_load(self, tmp_path, mixed_dataset):
        _, spec_path = mixed_dataset
        config = PipelineConfig(csv_path=str(tmp_path / "nope.csv"), spec_path=spec_path)
        with pytest.raises(StageFailure) as exc_info:
            run_experiment(config, str(tmp_path / "out"))
        assert exc_info.value.stage == "load-csv"

    def test_c_grid_selection(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        config = PipelineConfig(
            csv_path=csv_path, spec_path=spec_path, seed=5,
            models=("classical-linear",), c_grid=(0.1, 1.0, 10.0))
        result = run_experiment(config, str(tmp_path / "out"))
        assert result.model_metrics["classical-linear"]["svm_C"] in (0.1, 1.0, 10.0)

    def test_shot_kernel_mode(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        config = PipelineConfig(
            csv_path=csv_path, spec_path=spec_path, seed=5,
            models=("quantum-kernel",), kernel_mode="shots", kernel_shots=128)
        result = run_experiment(config, str(tmp_path / "out"))
        assert 0.0 <= result.model_metrics["quantum-kernel"]["test_auc"] <= 1.0

    @pytest.mark.filterwarnings("ignore::qkml.errors.StepSizeWarning")
    def test_variational_stage_artifacts(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        config = PipelineConfig(
            csv_path=csv_path, spec_path=spec_path, seed=5,
            models=("quantum-kernel",), variational_enabled=True,
            variational_iterations=3, variational_learning_rate=0.005)
        run_experiment(config, str(tmp_path / "out"))
        assert (tmp_path / "out" / "variational_trace.csv").exists()
        assert (tmp_path / "out" / "variational_trace.png").exists()

    def test_policy_operating_point_recorded(self, tmp_path, mixed_dataset):
        csv_path, spec_path = mixed_dataset
        config = PipelineConfig(
            csv_path=csv_path, spec_path=spec_path, seed=5,
            models=("classical-rbf",), threshold_policy="recall_first",
            threshold_floor=0.8)
        result = run_experiment(config, str(tmp_path / "out"))
        policy = result.model_metrics["classical-rbf"]["policy"]
        assert policy["name"] == "recall_first"
        assert policy["report"]["positive.recall"] >= 0.0


def linear_classifier_max_xor_accuracy():
    """Exhaustive oracle: best accuracy of any affine classifier on the four
    XOR corners. Enumerates every labeling realizable by sign(w.x + b)."""
    corners = np.array([[0.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, 0.0]])
    target = np.array([-1, -1, 1, 1])
    best = 0.0
    for w0, w1, b in itertools.product(np.linspace(-2, 2, 21), repeat=3):
        pred = np.where(corners @ np.array([w0, w1]) + b >= 0, 1, -1)
        best = max(best, float(np.mean(pred == target)))
        if best == 1.0:
            return best
    return best


class TestSeparabilityDirection:
    def test_xor_not_linearly_separable_oracle(self):
        assert linear_classifier_max_xor_accuracy() <= 0.75

    def test_linear_svm_capped_on_xor(self, tmp_path, xor_dataset):
        csv_path, spec_path = xor_dataset
        config = PipelineConfig(csv_path=csv_path, spec_path=spec_path, seed=7,
                                models=("classical-linear",))
        result = run_experiment(config, str(tmp_path / "out"))
        assert result.model_metrics["classical-linear"]["default"]["accuracy"] <= 0.75

    def test_quantum_kernel_separates_xor_some_seed(self, tmp_path, xor_dataset):
        csv_path, spec_path = xor_dataset
        reached = []
        for seed in range(3):
            config = PipelineConfig(csv_path=csv_path, spec_path=spec_path, seed=seed,
                                    models=("quantum-kernel",))
            result = run_experiment(config, str(tmp_path / f"out{seed}"))
            reached.append(result.model_metrics["quantum-kernel"]["train_accuracy"])
        assert max(reached) >= 0.99
