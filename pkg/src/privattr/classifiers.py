"""Differentiable multiclass classifiers with analytic input gradients.

Two kinds are provided, both in the one-vs-all style where prediction is
the argmax over m raw decision values (lowest index wins ties):

* ``linear-ova``: per-class affine scores.  Decision values are the raw
  pre-sigmoid scores so their input gradients never vanish.
* ``one-hidden-relu``: one fully connected ReLU hidden layer feeding m
  linear class outputs (softmax appears only inside the training loss).

Training is mini-batch gradient descent with a fixed, seeded schedule.
At the end of every epoch the full-dataset cross-entropy is evaluated; an
epoch that increased it is rolled back and the learning rate halved, so
the recorded loss is non-increasing across accepted steps while the whole
procedure stays deterministic for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .graphs import BehaviorMatrix, LabelSet

KIND_LINEAR = "linear-ova"
KIND_MLP = "one-hidden-relu"


@dataclass
class LinearOvaClassifier:
    weights: np.ndarray   # (m, n_features)
    biases: np.ndarray    # (m,)

    kind = KIND_LINEAR

    @property
    def class_count(self) -> int:
        return self.weights.shape[0]

    @property
    def feature_count(self) -> int:
        return self.weights.shape[1]

    def decision_values(self, x) -> np.ndarray:
        x = _check_input(self, x)
        return self.weights @ x + self.biases

    def decision_matrix(self, X) -> np.ndarray:
        return np.asarray(X) @ self.weights.T + self.biases

    def predict(self, x) -> int:
        return int(np.argmax(self.decision_values(x))) + 1

    def predict_many(self, X) -> np.ndarray:
        return np.argmax(self.decision_matrix(X), axis=1) + 1

    def input_gradient(self, x, class_label: int) -> np.ndarray:
        _check_class(self, class_label)
        _check_input(self, x)
        # affine score: the gradient is the class weight row, independent of x
        return self.weights[class_label - 1].copy()


@dataclass
class OneHiddenReluClassifier:
    w_in: np.ndarray    # (hidden, n_features)
    b_in: np.ndarray    # (hidden,)
    w_out: np.ndarray   # (m, hidden)
    b_out: np.ndarray   # (m,)

    kind = KIND_MLP

    @property
    def class_count(self) -> int:
        return self.w_out.shape[0]

    @property
    def feature_count(self) -> int:
        return self.w_in.shape[1]

    def _hidden(self, x) -> np.ndarray:
        return np.maximum(self.w_in @ x + self.b_in, 0.0)

    def decision_values(self, x) -> np.ndarray:
        x = _check_input(self, x)
        return self.w_out @ self._hidden(x) + self.b_out

    def decision_matrix(self, X) -> np.ndarray:
        H = np.maximum(np.asarray(X) @ self.w_in.T + self.b_in, 0.0)
        return H @ self.w_out.T + self.b_out

    def predict(self, x) -> int:
        return int(np.argmax(self.decision_values(x))) + 1

    def predict_many(self, X) -> np.ndarray:
        return np.argmax(self.decision_matrix(X), axis=1) + 1

    def input_gradient(self, x, class_label: int) -> np.ndarray:
        _check_class(self, class_label)
        x = _check_input(self, x)
        pre = self.w_in @ x + self.b_in
        active = pre > 0.0  # ReLU subgradient is 0 at exactly 0
        return (self.w_out[class_label - 1] * active) @ self.w_in


def _check_input(clf, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (clf.feature_count,):
        raise ValidationError(
            f"input has {x.shape} entries, classifier expects ({clf.feature_count},)")
    return x


def _check_class(clf, class_label: int) -> None:
    if not (1 <= class_label <= clf.class_count):
        raise ValidationError(
            f"class {class_label} outside 1..{clf.class_count}")


# ---------------------------------------------------------------------------
# Training


def _as_arrays(behaviors, labels, class_count):
    if isinstance(behaviors, BehaviorMatrix):
        if not isinstance(labels, LabelSet) or labels.binary:
            raise ValidationError("training from a BehaviorMatrix needs multiclass labels")
        users = labels.users
        X = behaviors.matrix[users].toarray()
        y = labels.vector(users) - 1
        m = labels.class_count
    else:
        X = np.asarray(behaviors, dtype=np.float64)
        y = np.asarray(labels, dtype=np.int64) - 1
        if class_count is None:
            if y.size == 0:
                raise ValidationError("empty training set")
            class_count = int(y.max()) + 1
        m = int(class_count)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError("behavior rows and labels are misaligned")
    if X.shape[0] == 0:
        raise ValidationError("empty training set")
    if m < 2:
        raise ValidationError("need at least two classes")
    present = np.unique(y)
    missing = sorted(set(range(m)) - set(int(c) for c in present))
    if missing:
        raise ValidationError(f"class {missing[0] + 1} has no training examples")
    if np.any(y < 0) or np.any(y >= m):
        raise ValidationError("labels outside 1..class_count")
    return X, y, m


def _softmax(scores):
    z = scores - scores.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _xent(scores, y, params, l2):
    probs = _softmax(scores)
    n = y.shape[0]
    nll = -np.log(np.clip(probs[np.arange(n), y], 1e-300, None)).mean()
    reg = 0.5 * l2 * sum(float((p * p).sum()) for p in params)
    return nll + reg


def train_classifier(kind, behaviors, labels, class_count=None, *,
                     hidden_width: int = 16, learning_rate: float = 0.5,
                     epochs: int = 300, batch_size: int = 32,
                     l2: float = 1e-4, seed=0):
    """Train a classifier of the given kind on (behaviors, labels).

    Accepts either a (BehaviorMatrix, multiclass LabelSet) pair or plain
    arrays (X, y) with labels 1..m.  Every class must appear at least once.
    Deterministic for a fixed seed.
    """
    X, y, m = _as_arrays(behaviors, labels, class_count)
    n_features = X.shape[1]
    rng = np.random.default_rng(seed)

    if kind == KIND_LINEAR:
        # zero init keeps the two-class antisymmetry C2 = -C1 under softmax
        params = [np.zeros((m, n_features)), np.zeros(m)]

        def scores_of(p, Xb):
            return Xb @ p[0].T + p[1]

        def grads_of(p, Xb, yb):
            probs = _softmax(scores_of(p, Xb))
            probs[np.arange(yb.shape[0]), yb] -= 1.0
            probs /= yb.shape[0]
            return [probs.T @ Xb + l2 * p[0], probs.sum(axis=0)]
    elif kind == KIND_MLP:
        if hidden_width < 1:
            raise ValidationError("hidden_width must be at least 1")
        scale_in = np.sqrt(2.0 / n_features)
        scale_out = np.sqrt(2.0 / hidden_width)
        params = [scale_in * rng.standard_normal((hidden_width, n_features)),
                  np.zeros(hidden_width),
                  scale_out * rng.standard_normal((m, hidden_width)),
                  np.zeros(m)]

        def scores_of(p, Xb):
            H = np.maximum(Xb @ p[0].T + p[1], 0.0)
            return H @ p[2].T + p[3]

        def grads_of(p, Xb, yb):
            pre = Xb @ p[0].T + p[1]
            H = np.maximum(pre, 0.0)
            probs = _softmax(H @ p[2].T + p[3])
            probs[np.arange(yb.shape[0]), yb] -= 1.0
            probs /= yb.shape[0]
            gh = (probs @ p[2]) * (pre > 0.0)
            return [gh.T @ Xb + l2 * p[0], gh.sum(axis=0),
                    probs.T @ H + l2 * p[2], probs.sum(axis=0)]
    else:
        raise ValidationError(f"unknown classifier kind {kind!r}")

    n = X.shape[0]
    bs = n if batch_size is None else min(batch_size, n)
    lr = learning_rate
    loss = _xent(scores_of(params, X), y, params, l2)
    for _ in range(epochs):
        snapshot = [p.copy() for p in params]
        order = rng.permutation(n)
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            grads = grads_of(params, X[idx], y[idx])
            for p, g in zip(params, grads):
                p -= lr * g
        new_loss = _xent(scores_of(params, X), y, params, l2)
        if not np.isfinite(new_loss) or new_loss > loss + 1e-12:
            params = snapshot  # reject the epoch, try again more cautiously
            lr *= 0.5
            if lr < 1e-6:
                break
        else:
            loss = new_loss

    if kind == KIND_LINEAR:
        return LinearOvaClassifier(params[0], params[1])
    return OneHiddenReluClassifier(params[0], params[1], params[2], params[3])


# ---------------------------------------------------------------------------
# Module-level op aliases and persistence


def decision_values(clf, x) -> np.ndarray:
    return clf.decision_values(x)


def predict(clf, x) -> int:
    return clf.predict(x)


def input_gradient(clf, x, class_label: int) -> np.ndarray:
    return clf.input_gradient(x, class_label)


def _write_matrix(fh, name, arr):
    arr = np.atleast_2d(arr)
    fh.write(f"{name} {arr.shape[0]} {arr.shape[1]}\n")
    for row in arr:
        fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def _read_matrix(lines, idx):
    header = lines[idx].split()
    name, rows, cols = header[0], int(header[1]), int(header[2])
    data = np.empty((rows, cols))
    for r in range(rows):
        data[r] = [float(v) for v in lines[idx + 1 + r].split()]
    return name, data, idx + 1 + rows


def save_classifier(clf, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"kind {clf.kind}\n")
        if clf.kind == KIND_LINEAR:
            _write_matrix(fh, "weights", clf.weights)
            _write_matrix(fh, "biases", clf.biases)
        else:
            _write_matrix(fh, "w_in", clf.w_in)
            _write_matrix(fh, "b_in", clf.b_in)
            _write_matrix(fh, "w_out", clf.w_out)
            _write_matrix(fh, "b_out", clf.b_out)


def load_classifier(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("kind "):
        raise ValidationError(f"{path}: not a classifier file")
    kind = lines[0].split(maxsplit=1)[1]
    mats = {}
    idx = 1
    try:
        while idx < len(lines):
            name, data, idx = _read_matrix(lines, idx)
            mats[name] = data
        if kind == KIND_LINEAR:
            return LinearOvaClassifier(mats["weights"], mats["biases"].ravel())
        if kind == KIND_MLP:
            return OneHiddenReluClassifier(mats["w_in"], mats["b_in"].ravel(),
                                           mats["w_out"], mats["b_out"].ravel())
    except (KeyError, ValueError, IndexError) as exc:
        raise ValidationError(f"{path}: malformed classifier file ({exc})") from None
    raise ValidationError(f"{path}: unknown classifier kind {kind!r}")
