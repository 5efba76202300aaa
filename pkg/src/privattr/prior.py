"""Binary logistic-regression prior over user behaviors.

The prior probability that a user holds the attribute is
``sigmoid(b . c + d)`` where ``b`` is the user's behavior row and
``(c, d)`` are fit by maximum likelihood (full-batch gradient descent with
a backtracking line search, so the regularized loss never increases across
accepted steps).  Users without any stored behavior entry get a prior of
exactly 0.5.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NumericalError, ValidationError
from .graphs import BehaviorMatrix, LabelSet

_ARMIJO = 1e-4


@dataclass
class BinaryLrModel:
    weights: np.ndarray
    bias: float
    l2_strength: float
    converged: bool = True
    epochs_run: int = 0
    final_grad_norm: float = 0.0

    def score(self, b: np.ndarray) -> float:
        return float(b @ self.weights + self.bias)


def _loss_and_grad(X, y, w, b, l2):
    """Regularized negative log-likelihood and its gradient.

    loss = sum_i log(1 + exp(-y_i h_i)) + (l2 / 2) ||w||^2, bias unpenalized.
    Evaluated through logaddexp, so no probability clamping is needed here.
    """
    h = X @ w + b
    loss = np.logaddexp(0.0, -y * h).sum() + 0.5 * l2 * float(w @ w)
    residual = expit(h) - (y + 1) / 2.0
    grad_w = X.T @ residual + l2 * w
    grad_b = residual.sum()
    return loss, grad_w, grad_b


def train_prior(behaviors: BehaviorMatrix, labels: LabelSet, l2_strength: float = 1.0,
                max_epochs: int = 500, tol: float = 1e-6) -> BinaryLrModel:
    """Fit the binary prior classifier on the labeled users.

    Requires at least one example per class.  Stops when the gradient
    2-norm drops to ``tol`` (converged=True) or after ``max_epochs``
    accepted steps (converged=False).
    """
    if not labels.binary:
        raise ValidationError("train_prior needs binary +1/-1 labels")
    if l2_strength < 0:
        raise ValidationError("l2_strength must be nonnegative")
    users = labels.users
    if users.size == 0:
        raise ValidationError("empty training set")
    y = labels.vector(users).astype(np.float64)
    if np.all(y > 0) or np.all(y < 0):
        raise ValidationError("training set contains a single class")
    X = behaviors.matrix[users].toarray()

    w = np.zeros(X.shape[1])
    b = 0.0
    loss, grad_w, grad_b = _loss_and_grad(X, y, w, b, l2_strength)
    step = 1.0
    epochs = 0
    grad_norm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
    while grad_norm > tol and epochs < max_epochs:
        g2 = grad_norm ** 2
        accepted = False
        while step > 1e-16:
            w_new = w - step * grad_w
            b_new = b - step * grad_b
            loss_new, gw_new, gb_new = _loss_and_grad(X, y, w_new, b_new, l2_strength)
            if not np.isfinite(loss_new):
                raise NumericalError(f"non-finite loss during training (step={step:g})")
            if loss_new <= loss - _ARMIJO * step * g2:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break  # line search floor reached; gradient is effectively noise
        w, b, loss = w_new, b_new, loss_new
        grad_w, grad_b = gw_new, gb_new
        grad_norm = float(np.sqrt(grad_w @ grad_w + grad_b * grad_b))
        step = min(step * 2.0, 1e4)
        epochs += 1

    return BinaryLrModel(w, float(b), l2_strength,
                         converged=grad_norm <= tol,
                         epochs_run=epochs,
                         final_grad_norm=grad_norm)


def predict_prior(model: BinaryLrModel, user: int, behaviors: BehaviorMatrix) -> float:
    """Prior probability for one user; exactly 0.5 without behavior entries.

    The reported value is the raw sigmoid (never clamped), so it can round
    to 0.0 or 1.0 in float64 for scores beyond about +-37.
    """
    if not (0 <= user < behaviors.user_count):
        raise ValidationError(f"unknown user id {user}")
    if not behaviors.has_entries(user):
        return 0.5
    return float(expit(model.score(behaviors.row(user))))


def prior_vector(model: BinaryLrModel, behaviors: BehaviorMatrix) -> np.ndarray:
    """Priors for every user: sigmoid scores, 0.5 where no entries exist."""
    scores = behaviors.matrix @ model.weights + model.bias
    q = expit(scores)
    q[~behaviors._entry_mask] = 0.5
    return q


def save_prior_model(model: BinaryLrModel, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"objects {model.weights.shape[0]}\n")
        fh.write(f"l2 {model.l2_strength!r}\n")
        fh.write(f"bias {model.bias!r}\n")
        fh.write("weights " + " ".join(repr(float(v)) for v in model.weights) + "\n")


def load_prior_model(path) -> BinaryLrModel:
    fields = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            key, _, rest = line.partition(" ")
            fields[key] = rest
    try:
        n = int(fields["objects"])
        l2 = float(fields["l2"])
        bias = float(fields["bias"])
        weights = np.asarray([float(v) for v in fields["weights"].split()], dtype=np.float64)
    except (KeyError, ValueError) as exc:
        raise ValidationError(f"{path}: malformed prior model file ({exc})") from None
    if weights.shape[0] != n:
        raise ValidationError(f"{path}: weight count {weights.shape[0]} does not match objects={n}")
    return BinaryLrModel(weights, bias, l2)
