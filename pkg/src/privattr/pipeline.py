"""End-to-end experiment pipelines over synthetic worlds.

Two pipelines are wired here:

* the inference experiment: behavior prior, then posterior propagation
  over the social graph (linearized engine or loopy BP), scored against
  held-out labels;
* the defense sweep: train a defender and independent attackers on the
  same world, defend every test user at each budget on a grid, and record
  each attacker's accuracy plus the realized noise size.

Every stochastic choice derives from explicit integer seeds, so any cell
of a sweep is reproducible bit for bit.  Phase I noise is budget
independent and computed once per user; only the sampling distribution is
re-solved per budget.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .classifiers import KIND_LINEAR, KIND_MLP, train_classifier
from .errors import DivergenceError, ValidationError
from .graphs import LabelSet, SynthConfig, gen_synthetic
from .lbp import Pmrf, lbp_run
from .linear import (ConvergenceReport, convergence_report, linear_iterate,
                     predict_from_residual, to_probability, to_residual)
from .mechanism import TargetDistribution, find_all_noises, select_noise
from .metrics import inference_accuracy, rank_auc
from .noise_search import PandaConfig, POLICY_MODIFY_ADD
from .prior import prior_vector, train_prior

ENGINE_LINEAR = "linear"
ENGINE_LBP = "lbp"


def split_train_test(labels: LabelSet, train_fraction: float, seed) -> tuple:
    """Stratified user split; every class lands at least one train user."""
    if not (0.0 < train_fraction < 1.0):
        raise ValidationError("train_fraction must lie strictly between 0 and 1")
    rng = np.random.default_rng(seed)
    by_class: dict = {}
    for u in sorted(labels.labels):
        by_class.setdefault(labels.labels[u], []).append(u)
    train, test = [], []
    for lab in sorted(by_class):
        users = np.asarray(by_class[lab])
        perm = rng.permutation(users.shape[0])
        k = max(1, int(round(train_fraction * users.shape[0])))
        k = min(k, users.shape[0] - 1) if users.shape[0] > 1 else 1
        train.extend(users[perm[:k]].tolist())
        test.extend(users[perm[k:]].tolist())
    if not test:
        raise ValidationError("split left no test users")
    return sorted(train), sorted(test)


# ---------------------------------------------------------------------------
# Inference experiment


@dataclass
class InferenceConfig:
    synth: SynthConfig
    engine: str = ENGINE_LINEAR
    w: float | None = None          # homophily strength; None picks the heuristic
    train_fraction: float = 0.5
    l2: float = 1.0
    max_epochs: int = 500
    prior_tol: float = 1e-6
    max_iters: int = 100
    stop_tol: float = 1e-3
    check_convergence: bool = True


@dataclass
class InferenceReport:
    posteriors: np.ndarray
    predictions: np.ndarray
    test_users: list
    accuracy: float
    accuracy_prior_only: float
    auc: float
    engine: str
    w: float
    converged: bool
    iterations: int
    convergence: ConvergenceReport


def run_inference_experiment(cfg: InferenceConfig) -> InferenceReport:
    """Synthesize a binary world, learn priors, propagate, and score.

    The propagation accuracy is paired against the prior-only baseline on
    the same train/test split.  With ``check_convergence`` the linearized
    engine refuses a residual strength at or beyond the necessary bound
    instead of iterating toward the inevitable divergence error.
    """
    graph, behaviors, labels = gen_synthetic(cfg.synth)
    if not labels.binary:
        raise ValidationError("the inference experiment needs a two-class world")
    train_users, test_users = split_train_test(labels, cfg.train_fraction,
                                               [cfg.synth.seed, 101])
    model = train_prior(behaviors, labels.restrict(train_users),
                        l2_strength=cfg.l2, max_epochs=cfg.max_epochs,
                        tol=cfg.prior_tol)
    priors = prior_vector(model, behaviors)

    report = convergence_report(graph)
    if cfg.w is None:
        # average-degree heuristic, kept strictly inside the guaranteed region
        w_hat = 0.9 * min(report.sufficient_bound, 0.49)
        w = 0.5 + w_hat
    else:
        w = cfg.w
        if not (0.5 < w < 1.0):
            raise ValidationError("homophily strength w must lie in (0.5, 1)")
        w_hat = w - 0.5
    report = convergence_report(graph, w_hat)

    if cfg.engine == ENGINE_LINEAR:
        if cfg.check_convergence and report.verdict == "divergent":
            raise DivergenceError(
                f"w_hat={w_hat:.6g} is at or beyond the necessary bound "
                f"1/(2*rho(M))={report.necessary_bound:.6g}; the residual iteration "
                "cannot converge (pass check_convergence=False to try anyway)")
        result = linear_iterate(graph, to_residual(priors), w_hat,
                                max_iters=cfg.max_iters, rel_tol=cfg.stop_tol)
        posteriors = to_probability(result.residuals, clamp=True)
        residuals = result.residuals
        converged, iterations = result.converged, result.iterations
    elif cfg.engine == ENGINE_LBP:
        result = lbp_run(Pmrf(graph, priors, w), max_iters=cfg.max_iters,
                         tol=cfg.stop_tol)
        posteriors = result.posteriors
        residuals = to_residual(posteriors)
        converged, iterations = result.converged, result.iterations
    else:
        raise ValidationError(f"unknown engine {cfg.engine!r}")

    predictions, _ = predict_from_residual(residuals)
    test = np.asarray(test_users)
    truth = labels.vector(test)
    prior_predictions, _ = predict_from_residual(to_residual(priors))
    accuracy = inference_accuracy(predictions[test], truth)
    accuracy_prior = inference_accuracy(prior_predictions[test], truth)
    auc = rank_auc(posteriors[test], truth)
    return InferenceReport(posteriors, predictions, list(test_users), accuracy,
                           accuracy_prior, auc, cfg.engine, w, converged,
                           iterations, report)


# ---------------------------------------------------------------------------
# Defense sweep


@dataclass
class SweepConfig:
    synth: SynthConfig
    betas: tuple = (0.0, 1.0, 2.0, 4.0, 8.0)
    policy: str = POLICY_MODIFY_ADD
    panda: PandaConfig = field(default_factory=PandaConfig)
    defender_kind: str = KIND_LINEAR
    attacker_kinds: tuple = (KIND_LINEAR, KIND_MLP)
    target: str = "train"           # "train" or "uniform"
    train_fraction: float = 0.6
    seeds: tuple = (1,)
    hidden_width: int = 16
    epochs: int = 300
    learning_rate: float = 0.5

    def __post_init__(self):
        if not self.betas:
            raise ValidationError("beta grid must be non-empty")
        if not self.seeds:
            raise ValidationError("seed list must be non-empty")
        if self.target not in ("train", "uniform"):
            raise ValidationError("target must be 'train' or 'uniform'")


SWEEP_COLUMNS = ("seed", "beta", "attacker", "accuracy", "mean_l0",
                 "mean_expected_l0")


def run_defense_sweep(cfg: SweepConfig):
    """Defend the test users at every budget and score each attacker.

    Returns one row dict per (seed, beta, attacker) cell with the attack
    accuracy on the defended vectors and the mean realized noise size.
    Attackers never see clean test data after beta 0; the beta 0 column is
    the no-defense baseline because a zero budget forces the zero noise.
    """
    rows = []
    for seed in cfg.seeds:
        world_cfg = replace(cfg.synth, seed=int(seed))
        _, behaviors, labels = gen_synthetic(world_cfg)
        if labels.binary:
            raise ValidationError("the defense sweep needs a multiclass world")
        train_users, test_users = split_train_test(labels, cfg.train_fraction,
                                                   [seed, 7])
        train_labels = labels.restrict(train_users)
        X_train = behaviors.matrix[np.asarray(train_users)].toarray()
        y_train = train_labels.vector(np.asarray(train_users))
        X_test = behaviors.matrix[np.asarray(test_users)].toarray()
        y_test = labels.vector(np.asarray(test_users))

        defender = train_classifier(cfg.defender_kind, X_train, y_train,
                                    labels.class_count, seed=[seed, 11],
                                    hidden_width=cfg.hidden_width,
                                    epochs=cfg.epochs,
                                    learning_rate=cfg.learning_rate)
        attackers = {}
        for k, kind in enumerate(cfg.attacker_kinds):
            attackers[kind] = train_classifier(
                kind, X_train, y_train, labels.class_count, seed=[seed, 12 + k],
                hidden_width=cfg.hidden_width, epochs=cfg.epochs,
                learning_rate=cfg.learning_rate)

        if cfg.target == "uniform":
            target = TargetDistribution.uniform(labels.class_count)
        else:
            target = TargetDistribution.from_labels(train_labels)

        # Phase I is budget independent: one noise set per user, reused below
        noise_sets = [find_all_noises(defender, x, cfg.policy, cfg.panda)
                      for x in X_test]

        for bi, beta in enumerate(cfg.betas):
            noisy = np.empty_like(X_test)
            sizes = np.empty(X_test.shape[0])
            expected = np.empty(X_test.shape[0])
            for ui, x in enumerate(X_test):
                record = select_noise(x, noise_sets[ui], target, float(beta),
                                      [seed, bi, ui])
                noisy[ui] = record.noisy
                sizes[ui] = np.count_nonzero(record.noisy - x)
                expected[ui] = float(record.distribution @ np.maximum(record.norms, 0))
            for kind, attacker in attackers.items():
                acc = inference_accuracy(attacker.predict_many(noisy), y_test)
                rows.append({"seed": int(seed), "beta": float(beta),
                             "attacker": kind, "accuracy": acc,
                             "mean_l0": float(sizes.mean()),
                             "mean_expected_l0": float(expected.mean())})
    return rows


def write_sweep_csv(rows, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
