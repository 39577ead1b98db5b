import numpy as np
import pytest

from qkml.ansatz import AnsatzConfig, random_params, zero_params
from qkml.errors import SingleClassError
from qkml.qkernel import (
    PSD_TOL,
    STRUCTURAL_ATOL,
    all_param_indices,
    cross_gram,
    dump_gram,
    dump_gram_csv,
    gram_gradient_param_shift,
    gram_matrix,
    gram_matrix_shots,
    kernel_gradient_param_shift,
    kernel_value,
    kernel_value_shots,
    load_gram,
    margin_diagnostics,
    pairwise_quantum_distance,
    states_matrix,
    validate_gram,
)

from oracles import brute_force_min_cross_distance


def make_instance(seed, n_qubits=2, layers=2, n_points=6):
    rng = np.random.Generator(np.random.PCG64(seed))
    config = AnsatzConfig(n_qubits=n_qubits, layers=layers)
    params = random_params(config, seed=seed + 1000, scale=np.pi / 3)
    X = rng.uniform(0, np.pi, size=(n_points, n_qubits))
    return config, params, X


class TestKernelValue:
    def test_self_overlap_one(self):
        config, params, X = make_instance(0)
        assert kernel_value(X[0], X[0], params, config) == pytest.approx(1.0, abs=1e-10)

    def test_orthogonal_pair(self):
        config = AnsatzConfig(n_qubits=1, layers=1, hadamard_init=False)
        params = zero_params(config)
        assert kernel_value(np.array([np.pi]), np.array([0.0]), params, config) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_symmetric(self):
        config, params, X = make_instance(1)
        assert kernel_value(X[0], X[1], params, config) == pytest.approx(
            kernel_value(X[1], X[0], params, config), abs=1e-15
        )

    def test_in_unit_interval(self):
        config, params, X = make_instance(2, n_points=10)
        for i in range(10):
            for j in range(10):
                assert 0.0 <= kernel_value(X[i], X[j], params, config) <= 1.0 + 1e-12


class TestGramMatrix:
    def test_single_point(self):
        config, params, X = make_instance(3, n_points=1)
        gram = gram_matrix(X, params, config)
        np.testing.assert_allclose(gram, [[1.0]], atol=1e-12)

    def test_duplicate_rows(self):
        config, params, X = make_instance(4, n_points=3)
        X[2] = X[0]
        gram = gram_matrix(X, params, config)
        np.testing.assert_allclose(gram[0], gram[2], atol=1e-12)

    def test_random_instance_psd_eigensolver_oracle(self):
        config, params, X = make_instance(5, n_points=8)
        gram = gram_matrix(X, params, config)
        assert np.linalg.eigvalsh(gram).min() >= -PSD_TOL

    def test_matches_pairwise_kernel_value(self):
        config, params, X = make_instance(6, n_points=4)
        gram = gram_matrix(X, params, config)
        for i in range(4):
            for j in range(4):
                assert gram[i, j] == pytest.approx(
                    kernel_value(X[i], X[j], params, config), abs=1e-12
                )

    @pytest.mark.parametrize("seed", range(20))
    def test_validity_sweep(self, seed):
        rng = np.random.Generator(np.random.PCG64(seed + 400))
        n = int(rng.integers(1, 5))
        layers = int(rng.integers(1, 4))
        n_points = int(rng.integers(2, 17))
        config = AnsatzConfig(n_qubits=n, layers=layers)
        params = random_params(config, seed=seed, scale=np.pi / 2)
        X = rng.uniform(0, np.pi, size=(n_points, n))
        gram = gram_matrix(X, params, config)
        validate_gram(gram)

    def test_empty_rejected(self):
        config, params, _ = make_instance(7)
        with pytest.raises(ValueError):
            gram_matrix(np.zeros((0, 2)), params, config)


class TestCrossGram:
    def test_equals_gram_when_same(self):
        config, params, X = make_instance(8, n_points=5)
        np.testing.assert_allclose(
            cross_gram(X, X, params, config), gram_matrix(X, params, config), atol=1e-12
        )

    def test_single_test_point_matches_column(self):
        config, params, X = make_instance(9, n_points=5)
        gram = gram_matrix(X, params, config)
        row = cross_gram(X[2:3], X, params, config)
        np.testing.assert_allclose(row[0], gram[2], atol=1e-12)

    def test_entries_in_unit_interval(self):
        config, params, X = make_instance(10, n_points=6)
        block = cross_gram(X[:2], X[2:], params, config)
        assert np.all(block >= 0.0) and np.all(block <= 1.0 + 1e-12)


class TestParamShiftGradient:
    def test_untouched_qubit_zero_derivative(self):
        # n=2 product ansatz (no entangler would need n>=2 chain edge removal;
        # use 1 layer, data only on qubit 0, derivative wrt qubit 1's angle).
        # With a chain CZ present the kernel still does not depend on qubit 1's
        # RY when both data points encode the same constant angle there.
        config = AnsatzConfig(n_qubits=2, layers=1, hadamard_init=False)
        params = zero_params(config)
        x1 = np.array([0.7, 0.0])
        x2 = np.array([2.1, 0.0])
        grad = kernel_gradient_param_shift(x1, x2, params, config, (0, 1, "ry"))
        assert grad == pytest.approx(0.0, abs=1e-10)

    @pytest.mark.parametrize("seed", range(10))
    def test_matches_finite_difference(self, seed):
        config, params, X = make_instance(seed + 30, n_points=2)
        h = 1e-5
        for index in all_param_indices(config):
            analytic = kernel_gradient_param_shift(X[0], X[1], params, config, index)
            from qkml.qkernel import shift_param

            plus = kernel_value(X[0], X[1], shift_param(params, index, h), config)
            minus = kernel_value(X[0], X[1], shift_param(params, index, -h), config)
            assert analytic == pytest.approx((plus - minus) / (2 * h), abs=1e-6)

    def test_magnitude_bound_sweep(self):
        # |dk/dtheta| <= 2 everywhere (1000-sample random sweep).
        rng = np.random.Generator(np.random.PCG64(77))
        worst = 0.0
        for trial in range(1000):
            n = int(rng.integers(1, 4))
            config = AnsatzConfig(n_qubits=n, layers=int(rng.integers(1, 3)))
            params = random_params(config, seed=trial, scale=np.pi)
            x1 = rng.uniform(0, np.pi, n)
            x2 = rng.uniform(0, np.pi, n)
            indices = all_param_indices(config)
            index = indices[int(rng.integers(len(indices)))]
            worst = max(worst, abs(kernel_gradient_param_shift(x1, x2, params, config, index)))
        assert worst <= 2.0 + 1e-10

    def test_gram_gradient_matches_entrywise(self):
        config, params, X = make_instance(55, n_points=4)
        index = (1, 0, "rz")
        dk = gram_gradient_param_shift(X, params, config, index)
        for i in range(4):
            for j in range(4):
                assert dk[i, j] == pytest.approx(
                    kernel_gradient_param_shift(X[i], X[j], params, config, index), abs=1e-12
                )

    def test_invalid_index(self):
        config, params, X = make_instance(11)
        with pytest.raises(ValueError):
            kernel_gradient_param_shift(X[0], X[1], params, config, (5, 0, "ry"))
        with pytest.raises(ValueError):
            kernel_gradient_param_shift(X[0], X[1], params, config, (0, 0, "rx"))


class TestQuantumDistance:
    def test_identical_points(self):
        config, params, X = make_instance(12)
        assert pairwise_quantum_distance(X[0], X[0], params, config) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_orthogonal_states(self):
        config = AnsatzConfig(n_qubits=1, layers=1, hadamard_init=False)
        params = zero_params(config)
        d = pairwise_quantum_distance(np.array([0.0]), np.array([np.pi]), params, config)
        assert d == pytest.approx(2.0, abs=1e-12)

    @pytest.mark.parametrize("seed", range(10))
    def test_lower_bound_vs_overlap_oracle(self, seed):
        config, params, X = make_instance(seed + 60, n_points=2)
        states = states_matrix(X, params, config)
        overlap = np.vdot(states[0], states[1])
        d = pairwise_quantum_distance(X[0], X[1], params, config)
        assert d >= 2.0 * (1.0 - abs(overlap)) - 1e-12
        # consistency with kernel: d >= 2(1 - sqrt(k))
        k = kernel_value(X[0], X[1], params, config)
        assert d >= 2.0 * (1.0 - np.sqrt(k)) - 1e-12


class TestMarginDiagnostics:
    def test_identical_features_opposite_labels(self):
        config, params, _ = make_instance(13)
        X = np.array([[0.3, 0.4], [0.3, 0.4]])
        diag = margin_diagnostics(X, np.array([1, -1]), params, config)
        assert diag.quantum_margin == pytest.approx(0.0, abs=1e-12)

    def test_orthogonal_pair(self):
        config = AnsatzConfig(n_qubits=1, layers=1, hadamard_init=False)
        params = zero_params(config)
        X = np.array([[0.0], [np.pi]])
        diag = margin_diagnostics(X, np.array([1, -1]), params, config)
        assert diag.quantum_margin == pytest.approx(2.0, abs=1e-12)

    def test_matches_brute_force_enumeration(self):
        config, params, X = make_instance(14, n_points=10)
        y = np.array([1, 1, 1, 1, 1, -1, -1, -1, -1, -1])
        diag = margin_diagnostics(X, y, params, config)
        states = states_matrix(X, params, config)
        min_d, mean_d = brute_force_min_cross_distance(states, y)
        assert diag.quantum_margin == pytest.approx(min_d, abs=1e-12)
        assert diag.mean_cross_distance == pytest.approx(mean_d, abs=1e-12)

    def test_single_class_rejected(self):
        config, params, X = make_instance(15)
        with pytest.raises(SingleClassError):
            margin_diagnostics(X, np.ones(len(X)), params, config)


class TestShotMode:
    def test_unbiased_estimate(self):
        config, params, X = make_instance(16)
        exact = kernel_value(X[0], X[1], params, config)
        estimates = [
            kernel_value_shots(X[0], X[1], params, config, shots=256, seed=s)
            for s in range(200)
        ]
        se = np.sqrt(exact * (1 - exact) / 256 / 200)
        assert abs(np.mean(estimates) - exact) < 4 * se + 1e-12

    def test_deterministic_per_seed(self):
        config, params, X = make_instance(17)
        a = kernel_value_shots(X[0], X[1], params, config, shots=128, seed=9)
        b = kernel_value_shots(X[0], X[1], params, config, shots=128, seed=9)
        assert a == b

    def test_gram_shots_symmetric_unit_diagonal(self):
        config, params, X = make_instance(18, n_points=4)
        gram = gram_matrix_shots(X, params, config, shots=64, seed=3)
        np.testing.assert_array_equal(gram, gram.T)
        np.testing.assert_array_equal(np.diag(gram), np.ones(4))


class TestGramDump:
    def test_binary_round_trip(self, tmp_path):
        config, params, X = make_instance(19, n_points=5)
        gram = gram_matrix(X, params, config)
        path = tmp_path / "gram.qkgm"
        dump_gram(gram, str(path))
        raw = path.read_bytes()
        assert raw[:4] == b"QKGM"
        assert raw[4] == 1
        assert int.from_bytes(raw[5:13], "little") == 5
        np.testing.assert_array_equal(load_gram(str(path)), gram)

    def test_csv_round_trip(self, tmp_path):
        config, params, X = make_instance(20, n_points=3)
        gram = gram_matrix(X, params, config)
        path = tmp_path / "gram.csv"
        dump_gram_csv(gram, str(path))
        np.testing.assert_allclose(np.loadtxt(path, delimiter=","), gram, atol=1e-15)


class TestValidateGram:
    def test_rejects_asymmetric(self):
        bad = np.array([[1.0, 0.5], [0.4, 1.0]])
        with pytest.raises(ValueError, match="asymmetry"):
            validate_gram(bad)

    def test_rejects_bad_diagonal(self):
        bad = np.array([[1.0, 0.2], [0.2, 0.8]])
        with pytest.raises(ValueError, match="diagonal"):
            validate_gram(bad)
        validate_gram(bad, unit_diagonal=False)

    def test_rejects_indefinite(self):
        bad = np.array([[1.0, 2.0], [2.0, 1.0]])
        with pytest.raises(ValueError, match="eigenvalue"):
            validate_gram(bad)

    def test_tolerances_exported(self):
        assert STRUCTURAL_ATOL == 1e-10
        assert PSD_TOL == 1e-8
