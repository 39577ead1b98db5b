import numpy as np
import pytest

from qkml.errors import NonPsdKernelWarning, SingleClassError
from qkml.svm import (
    SvmModel,
    decision_value,
    decision_values,
    dual_objective,
    hinge_loss,
    kernel_fingerprint,
    load_model,
    model_summary,
    predict,
    save_model,
    solve_dual_reference,
    train_smo,
)


def random_psd_instance(seed, n=8):
    """Random PSD kernel with unit-ish diagonal plus balanced labels."""
    rng = np.random.Generator(np.random.PCG64(seed))
    feats = rng.normal(size=(n, 3))
    kernel = np.exp(-0.5 * np.sum((feats[:, None] - feats[None, :]) ** 2, axis=2))
    y = np.ones(n)
    y[: n // 2] = -1.0
    rng.shuffle(y)
    if len(np.unique(y)) < 2:  # n == 1 guard, unused in practice
        y[0] = -y[0]
    return kernel, y


def kkt_violations(model, kernel, y, tol):
    f = decision_values(model, kernel)
    margins = y * f
    bad = 0
    for i in range(len(y)):
        a = model.alpha[i]
        if a <= 1e-8:
            bad += margins[i] < 1 - tol
        elif a >= model.C - 1e-8:
            bad += margins[i] > 1 + tol
        else:
            bad += abs(margins[i] - 1) > tol
    return bad


class TestClosedFormTwoPoint:
    # K = I, y = [+1, -1], C = 10: constraint forces alpha1 = alpha2 = a,
    # objective 2a - a^2 peaks at a = 1; free SVs pin b = 0.
    def test_smo(self):
        model = train_smo(np.eye(2), np.array([1.0, -1.0]), C=10.0, tol=1e-6)
        np.testing.assert_allclose(model.alpha, [1.0, 1.0], atol=1e-6)
        assert model.bias == pytest.approx(0.0, abs=1e-6)

    def test_reference(self):
        model = solve_dual_reference(np.eye(2), np.array([1.0, -1.0]), C=10.0)
        np.testing.assert_allclose(model.alpha, [1.0, 1.0], atol=1e-8)
        assert model.bias == pytest.approx(0.0, abs=1e-8)


class TestTrainSmo:
    @pytest.mark.parametrize("seed", range(10))
    def test_equality_constraint(self, seed):
        kernel, y = random_psd_instance(seed)
        model = train_smo(kernel, y, C=1.0)
        assert abs(np.dot(model.alpha, y)) <= 1e-8

    @pytest.mark.parametrize("seed", range(10))
    def test_box_constraint(self, seed):
        kernel, y = random_psd_instance(seed, n=10)
        model = train_smo(kernel, y, C=0.7)
        assert np.all(model.alpha >= -1e-12)
        assert np.all(model.alpha <= 0.7 + 1e-12)

    @pytest.mark.parametrize("seed", range(20))
    def test_objective_matches_reference(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed + 900))
        n = int(rng.integers(4, 13))
        kernel, y = random_psd_instance(seed, n=n)
        c_value = float(rng.choice([0.5, 1.0, 10.0]))
        smo = train_smo(kernel, y, C=c_value, tol=1e-5)
        ref = solve_dual_reference(kernel, y, C=c_value, iterations=4000)
        obj_smo = dual_objective(smo.alpha, kernel, y)
        obj_ref = dual_objective(ref.alpha, kernel, y)
        assert abs(obj_smo - obj_ref) <= 1e-4

    @pytest.mark.parametrize("seed", range(10))
    def test_kkt_suite(self, seed):
        kernel, y = random_psd_instance(seed, n=12)
        model = train_smo(kernel, y, C=1.0, tol=1e-4)
        assert kkt_violations(model, kernel, y, tol=1e-3) == 0

    def test_single_class_rejected(self):
        with pytest.raises(SingleClassError):
            train_smo(np.eye(3), np.ones(3), C=1.0)

    def test_bad_labels_rejected(self):
        with pytest.raises(ValueError):
            train_smo(np.eye(2), np.array([0.0, 1.0]), C=1.0)

    def test_non_psd_jitter_warning(self):
        kernel = np.array([[1.0, 0.0, 0.99], [0.0, 1.0, 0.0], [0.99, 0.0, -1.0]])
        with pytest.warns(NonPsdKernelWarning):
            model = train_smo(kernel, np.array([1.0, -1.0, 1.0]), C=1.0)
        assert np.all(np.isfinite(model.alpha))

    def test_determinism(self):
        kernel, y = random_psd_instance(5, n=9)
        a = train_smo(kernel, y, C=1.0)
        b = train_smo(kernel, y, C=1.0)
        assert np.array_equal(a.alpha, b.alpha) and a.bias == b.bias

    def test_support_indices(self):
        kernel, y = random_psd_instance(3)
        model = train_smo(kernel, y, C=1.0)
        np.testing.assert_array_equal(
            model.support_indices, np.where(model.alpha > 1e-8)[0]
        )


class TestReferenceSolver:
    @pytest.mark.parametrize("seed", range(5))
    def test_feasible_at_every_iterate(self, seed):
        # run the projection directly on random ascent points
        from qkml.svm import _project_box_hyperplane

        rng = np.random.Generator(np.random.PCG64(seed))
        y = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])
        for _ in range(20):
            v = rng.normal(scale=3.0, size=6)
            alpha = _project_box_hyperplane(v, y, C=2.0)
            assert np.all(alpha >= -1e-10) and np.all(alpha <= 2.0 + 1e-10)
            assert abs(np.dot(alpha, y)) <= 1e-10

    def test_objective_non_decreasing(self):
        kernel, y = random_psd_instance(9, n=8)
        q = np.outer(y, y) * kernel
        step = 1.0 / np.linalg.eigvalsh(q).max()
        from qkml.svm import _project_box_hyperplane

        alpha = np.zeros(8)
        prev = dual_objective(alpha, kernel, y)
        for _ in range(50):
            alpha = _project_box_hyperplane(alpha + step * (1.0 - q @ alpha), y, C=1.0)
            cur = dual_objective(alpha, kernel, y)
            assert cur >= prev - 1e-12
            prev = cur


class TestDecisionAndPredict:
    def test_bias_only(self):
        model = SvmModel(
            alpha=np.zeros(3), bias=0.3, labels=np.array([1.0, -1.0, 1.0]), C=1.0,
            training_kernel_fingerprint="00" * 32,
        )
        assert decision_value(model, np.array([0.5, 0.5, 0.5])) == pytest.approx(0.3)

    def test_free_sv_kkt_value(self):
        kernel, y = random_psd_instance(21, n=10)
        model = train_smo(kernel, y, C=5.0, tol=1e-6)
        free = (model.alpha > 1e-6) & (model.alpha < 5.0 - 1e-6)
        for i in np.where(free)[0]:
            assert y[i] * decision_value(model, kernel[i]) == pytest.approx(1.0, abs=1e-3)

    def test_linearity_in_kernel_row(self):
        kernel, y = random_psd_instance(22)
        model = train_smo(kernel, y, C=1.0)
        row = kernel[0]
        f1 = decision_value(model, row) - model.bias
        f2 = decision_value(model, 2 * row) - model.bias
        assert f2 == pytest.approx(2 * f1, abs=1e-12)

    def test_predict_signs_and_tie(self):
        model = SvmModel(
            alpha=np.zeros(1), bias=0.7, labels=np.array([1.0]), C=1.0,
            training_kernel_fingerprint="00" * 32,
        )
        assert predict(model, np.array([0.0])) == 1
        object.__setattr__(model, "bias", -0.1)
        assert predict(model, np.array([0.0])) == -1
        object.__setattr__(model, "bias", 0.0)
        assert predict(model, np.array([0.0])) == 1  # documented tie-break

    def test_length_mismatch(self):
        kernel, y = random_psd_instance(23)
        model = train_smo(kernel, y, C=1.0)
        with pytest.raises(ValueError):
            decision_value(model, np.zeros(3))


class TestHingeLoss:
    def test_separated_data_zero_hinge(self):
        kernel = np.eye(2) * 4.0
        y = np.array([1.0, -1.0])
        model = train_smo(kernel, y, C=10.0, tol=1e-8)
        assert hinge_loss(model, kernel, y) == pytest.approx(0.0, abs=1e-6)


class TestSerialization:
    def test_round_trip(self, tmp_path):
        kernel, y = random_psd_instance(31)
        model = train_smo(kernel, y, C=2.5)
        path = tmp_path / "model.qksv"
        save_model(model, str(path))
        loaded = load_model(str(path))
        np.testing.assert_array_equal(loaded.alpha, model.alpha)
        np.testing.assert_array_equal(loaded.labels, model.labels)
        assert loaded.bias == model.bias
        assert loaded.C == model.C
        assert loaded.training_kernel_fingerprint == model.training_kernel_fingerprint

    def test_magic_and_layout(self, tmp_path):
        kernel, y = random_psd_instance(32, n=4)
        model = train_smo(kernel, y, C=1.0)
        path = tmp_path / "model.qksv"
        save_model(model, str(path))
        raw = path.read_bytes()
        assert raw[:4] == b"QKSV"
        assert raw[4] == 1
        assert int.from_bytes(raw[5:13], "little") == 4
        assert len(raw) == 4 + 1 + 8 + 8 + 8 + 4 * 8 + 4 + 32

    def test_fingerprint_tracks_kernel(self):
        kernel, y = random_psd_instance(33)
        assert kernel_fingerprint(kernel) != kernel_fingerprint(kernel + 1e-9)
        model = train_smo(kernel, y, C=1.0)
        assert model.training_kernel_fingerprint == kernel_fingerprint(kernel)

    def test_text_summary(self):
        kernel, y = random_psd_instance(34)
        model = train_smo(kernel, y, C=1.0)
        text = model_summary(model)
        assert "support vectors" in text and "sha256" in text
