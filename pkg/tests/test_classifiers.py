import numpy as np
import pytest

from privattr import (KIND_LINEAR, KIND_MLP, LinearOvaClassifier,
                      OneHiddenReluClassifier, ValidationError,
                      load_classifier, save_classifier, train_classifier)


def _blobs(rng, centers, n_per=30, spread=0.05):
    X, y = [], []
    for center, lab in centers:
        pts = np.clip(center + spread * rng.standard_normal((n_per, len(center))), 0, 1)
        X.append(pts)
        y.extend([lab] * n_per)
    return np.vstack(X), np.asarray(y)


def _xor_data(seed=0, n_per=25):
    rng = np.random.default_rng(seed)
    centers = [((0.0, 0.0), 1), ((1.0, 1.0), 1), ((0.0, 1.0), 2), ((1.0, 0.0), 2)]
    return _blobs(rng, [(np.asarray(c), lab) for c, lab in centers],
                  n_per=n_per, spread=0.08)


def _fd_input_gradient(clf, x, label, h=1e-5):
    grad = np.empty_like(x)
    for j in range(x.shape[0]):
        xp, xm = x.copy(), x.copy()
        xp[j] += h
        xm[j] -= h
        grad[j] = (clf.decision_values(xp)[label - 1]
                   - clf.decision_values(xm)[label - 1]) / (2 * h)
    return grad


class TestTraining:
    def test_separable_blobs_reach_full_accuracy(self):
        rng = np.random.default_rng(1)
        X, y = _blobs(rng, [(np.array([0.1, 0.1]), 1),
                            (np.array([0.9, 0.1]), 2),
                            (np.array([0.5, 0.9]), 3)])
        clf = train_classifier(KIND_LINEAR, X, y, 3, seed=0, epochs=300)
        assert (clf.predict_many(X) == y).mean() == 1.0

    def test_xor_separates_only_with_the_hidden_layer(self):
        X, y = _xor_data()
        lin = train_classifier(KIND_LINEAR, X, y, 2, seed=1, epochs=400)
        mlp = train_classifier(KIND_MLP, X, y, 2, seed=0, hidden_width=8,
                               epochs=800, learning_rate=0.5)
        assert (lin.predict_many(X) == y).mean() <= 0.75
        assert (mlp.predict_many(X) == y).mean() == 1.0

    def test_fixed_seed_reproduces_parameters(self):
        X, y = _xor_data()
        a = train_classifier(KIND_MLP, X, y, 2, seed=5, hidden_width=4, epochs=50)
        b = train_classifier(KIND_MLP, X, y, 2, seed=5, hidden_width=4, epochs=50)
        assert np.array_equal(a.w_in, b.w_in)
        assert np.array_equal(a.w_out, b.w_out)
        assert np.array_equal(a.b_in, b.b_in)
        assert np.array_equal(a.b_out, b.b_out)

    def test_missing_class_rejected(self):
        X = np.array([[0.1], [0.9]])
        with pytest.raises(ValidationError, match="no training examples"):
            train_classifier(KIND_LINEAR, X, np.array([1, 1]), 2)

    def test_two_class_linear_antisymmetry(self):
        X, y = _xor_data()
        clf = train_classifier(KIND_LINEAR, X, y, 2, seed=0, epochs=100)
        assert np.allclose(clf.weights[1], -clf.weights[0], atol=1e-12)
        assert np.allclose(clf.biases[1], -clf.biases[0], atol=1e-12)


class TestDecisionAndPredict:
    def test_zero_weights_tie_break_to_first_class(self):
        clf = LinearOvaClassifier(np.zeros((3, 2)), np.zeros(3))
        assert clf.predict(np.array([0.4, 0.6])) == 1

    def test_hand_set_weights(self):
        clf = LinearOvaClassifier(np.array([[1.0, 0.0], [0.0, 1.0]]), np.zeros(2))
        assert clf.predict(np.array([0.9, 0.1])) == 1
        assert clf.predict(np.array([0.1, 0.9])) == 2

    def test_class_permutation_permutes_decision_values(self):
        rng = np.random.default_rng(2)
        W = rng.standard_normal((4, 3))
        b = rng.standard_normal(4)
        perm = np.array([2, 0, 3, 1])
        clf = LinearOvaClassifier(W, b)
        permuted = LinearOvaClassifier(W[perm], b[perm])
        x = rng.random(3)
        assert np.allclose(permuted.decision_values(x),
                           clf.decision_values(x)[perm])

    def test_dimension_mismatch(self):
        clf = LinearOvaClassifier(np.zeros((2, 3)), np.zeros(2))
        with pytest.raises(ValidationError):
            clf.decision_values(np.zeros(4))

    def test_argmax_invariant_to_constant_shift(self):
        rng = np.random.default_rng(3)
        clf = LinearOvaClassifier(rng.standard_normal((3, 4)), rng.standard_normal(3))
        shifted = LinearOvaClassifier(clf.weights, clf.biases + 7.5)
        for _ in range(20):
            x = rng.random(4)
            assert clf.predict(x) == shifted.predict(x)

    def test_predict_is_pure(self):
        rng = np.random.default_rng(4)
        clf = OneHiddenReluClassifier(rng.standard_normal((5, 3)), rng.standard_normal(5),
                                      rng.standard_normal((2, 5)), rng.standard_normal(2))
        x = rng.random(3)
        assert all(clf.predict(x) == clf.predict(x) for _ in range(5))


class TestInputGradient:
    def test_linear_gradient_is_the_weight_row(self):
        rng = np.random.default_rng(5)
        W = rng.standard_normal((3, 6))
        clf = LinearOvaClassifier(W, rng.standard_normal(3))
        for label in (1, 2, 3):
            for _ in range(3):
                x = rng.random(6)
                assert np.array_equal(clf.input_gradient(x, label), W[label - 1])

    def test_mlp_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(6)
        clf = OneHiddenReluClassifier(rng.standard_normal((7, 4)), rng.standard_normal(7),
                                      rng.standard_normal((3, 7)), rng.standard_normal(3))
        x = rng.random(4)
        g = clf.input_gradient(x, 2)
        fd = _fd_input_gradient(clf, x, 2)
        rel = np.abs(g - fd) / np.maximum(np.abs(fd), 1e-10)
        assert rel.max() < 1e-4

    def test_dead_relu_region_gives_zero_gradient(self):
        clf = OneHiddenReluClassifier(np.full((4, 2), -1.0), np.full(4, -0.5),
                                      np.ones((2, 4)), np.zeros(2))
        grad = clf.input_gradient(np.array([0.3, 0.9]), 1)
        assert np.array_equal(grad, np.zeros(2))

    def test_gradient_check_at_twenty_random_pairs_per_kind(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            n, m = int(rng.integers(2, 6)), int(rng.integers(2, 5))
            lin = LinearOvaClassifier(rng.standard_normal((m, n)),
                                      rng.standard_normal(m))
            h = int(rng.integers(2, 8))
            mlp = OneHiddenReluClassifier(rng.standard_normal((h, n)),
                                          rng.standard_normal(h),
                                          rng.standard_normal((m, h)),
                                          rng.standard_normal(m))
            x = rng.random(n)
            label = int(rng.integers(1, m + 1))
            for clf in (lin, mlp):
                g = clf.input_gradient(x, label)
                fd = _fd_input_gradient(clf, x, label)
                denom = max(float(np.abs(fd).max()), 1e-10)
                assert np.abs(g - fd).max() / denom < 1e-4


def test_persistence_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    lin = LinearOvaClassifier(rng.standard_normal((3, 4)), rng.standard_normal(3))
    mlp = OneHiddenReluClassifier(rng.standard_normal((5, 4)), rng.standard_normal(5),
                                  rng.standard_normal((3, 5)), rng.standard_normal(3))
    for name, clf in (("lin.txt", lin), ("mlp.txt", mlp)):
        path = tmp_path / name
        save_classifier(clf, path)
        loaded = load_classifier(path)
        assert loaded.kind == clf.kind
        x = rng.random(4)
        assert np.array_equal(loaded.decision_values(x), clf.decision_values(x))
