"""Evaluation metrics: exact accuracy and rank-statistic AUC."""

from __future__ import annotations

import numpy as np

from .errors import ValidationError


def inference_accuracy(predicted, actual) -> float:
    """Fraction of users whose inferred value matches the truth.

    Accepts aligned sequences or two dicts keyed by user id (which must
    cover the same users).
    """
    if isinstance(predicted, dict) or isinstance(actual, dict):
        if not (isinstance(predicted, dict) and isinstance(actual, dict)):
            raise ValidationError("predictions and truth must both be dicts or both sequences")
        if set(predicted) != set(actual):
            raise ValidationError("predictions and truth cover different users")
        users = sorted(actual)
        pred = np.asarray([predicted[u] for u in users])
        true = np.asarray([actual[u] for u in users])
    else:
        pred = np.asarray(predicted)
        true = np.asarray(actual)
        if pred.shape != true.shape:
            raise ValidationError("predictions and truth are misaligned")
    if pred.size == 0:
        raise ValidationError("empty test set")
    return float(np.mean(pred == true))


def rank_auc(scores, labels) -> float:
    """Area under the ROC curve via the Mann-Whitney rank statistic.

    ``labels`` are +1/-1; tied scores receive their average rank.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape:
        raise ValidationError("scores and labels are misaligned")
    pos = labels == 1
    neg = labels == -1
    n_pos, n_neg = int(pos.sum()), int(neg.sum())
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUC needs both classes in the test set")
    order = np.argsort(scores, kind="stable")
    ranks = np.empty(scores.shape[0])
    sorted_scores = scores[order]
    i = 0
    rank = 1
    while i < sorted_scores.shape[0]:
        j = i
        while j + 1 < sorted_scores.shape[0] and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        avg = 0.5 * (rank + rank + (j - i))
        ranks[order[i:j + 1]] = avg
        rank += j - i + 1
        i = j + 1
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
