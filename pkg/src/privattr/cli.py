"""Command-line interface wiring the library into pipelines.

Subcommands: synth, train-prior, infer-lbp, infer-linear, spectral,
train-clf, panda, defend, game-lp, evaluate, sweep.  Exit codes: 0 on
success, 2 for validation errors (including bad arguments), 3 for
numerical failures such as divergence.  All randomness is controlled by
explicit --seed flags; outputs land only at the paths given via --out.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import pipeline
from .classifiers import (KIND_LINEAR, KIND_MLP, load_classifier,
                          save_classifier, train_classifier)
from .errors import NumericalError, ValidationError
from .game_lp import JointDistribution, build_lp, solve_lp
from .graphs import (SynthConfig, gen_synthetic, load_behaviors, load_graph,
                     load_labels, save_behaviors, save_graph, save_labels)
from .lbp import Pmrf, lbp_run
from .linear import (convergence_report, linear_iterate, to_probability,
                     to_residual)
from .mechanism import TargetDistribution, defend_user
from .metrics import inference_accuracy
from .noise_search import (PandaConfig, POLICIES, POLICY_MODIFY_ADD,
                           find_noise, find_noise_restricted_baseline,
                           quantize_noise)
from .prior import (load_prior_model, prior_vector, save_prior_model,
                    train_prior)

_KIND_ALIASES = {"linear": KIND_LINEAR, "mlp": KIND_MLP,
                 KIND_LINEAR: KIND_LINEAR, KIND_MLP: KIND_MLP}


def _add_synth_args(parser, multiclass_default=False):
    g = parser.add_argument_group("synthetic world")
    g.add_argument("--nodes", type=int, default=400)
    g.add_argument("--classes", type=int, default=5 if multiclass_default else 2)
    g.add_argument("--intra", type=float, default=0.05,
                   help="within-class edge probability")
    g.add_argument("--inter", type=float, default=0.005,
                   help="cross-class edge probability")
    g.add_argument("--proportions", type=str, default=None,
                   help="comma-separated class proportions (default balanced)")
    g.add_argument("--objects-per-class", type=int, default=6)
    g.add_argument("--signal", type=float, default=0.8,
                   help="probability a user rates its own class block")


def _synth_config(args, seed) -> SynthConfig:
    if args.proportions:
        props = tuple(float(v) for v in args.proportions.split(","))
    else:
        props = tuple([1.0 / args.classes] * args.classes)
    return SynthConfig(node_count=args.nodes, intra_p=args.intra,
                       inter_p=args.inter, proportions=props,
                       objects_per_class=args.objects_per_class,
                       signal_strength=args.signal, seed=seed)


def _load_priors(path, node_count: int) -> np.ndarray:
    """Read "user prior" lines; users absent from the file default to 0.5."""
    priors = np.full(node_count, 0.5)
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise ValidationError(f"{path}: expected 'user prior' at line {lineno}")
            u, q = int(parts[0]), float(parts[1])
            if not (0 <= u < node_count):
                raise ValidationError(f"{path}: user {u} outside the graph at line {lineno}")
            if not (0.0 <= q <= 1.0):
                raise ValidationError(f"{path}: prior out of [0, 1] at line {lineno}")
            priors[u] = q
    return priors


def _write_user_values(values, out, fmt="tsv"):
    lines = [f"{u} {v!r}" for u, v in values]
    text = "\n".join(lines) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _emit(payload: dict, out=None):
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _noise_payload(result) -> dict:
    nz = {int(i): float(v) for i, v in enumerate(result.noise) if v != 0.0}
    return {"target": result.target, "iterations": result.iterations,
            "success": result.success, "fell_back": result.fell_back,
            "l0": result.l0, "length": int(result.noise.shape[0]),
            "noise": nz}


# ---------------------------------------------------------------------------
# Subcommand handlers


def _cmd_synth(args):
    import os
    cfg = _synth_config(args, args.seed)
    graph, behaviors, labels = gen_synthetic(cfg)
    os.makedirs(args.out, exist_ok=True)
    save_graph(graph, os.path.join(args.out, "graph.txt"))
    save_behaviors(behaviors, os.path.join(args.out, "behaviors.tsv"))
    save_labels(labels, os.path.join(args.out, "labels.tsv"))
    _emit({"nodes": graph.node_count, "edges": graph.edge_count,
           "objects": behaviors.object_count, "classes": labels.class_count,
           "binary": labels.binary, "out": args.out})
    return 0


def _cmd_train_prior(args):
    behaviors = load_behaviors(args.behaviors)
    labels = load_labels(args.labels)
    model = train_prior(behaviors, labels, l2_strength=args.l2,
                        max_epochs=args.max_epochs, tol=args.tol)
    save_prior_model(model, args.out)
    if args.priors_out:
        q = prior_vector(model, behaviors)
        _write_user_values(list(enumerate(q.tolist())), args.priors_out)
    _emit({"converged": model.converged, "epochs": model.epochs_run,
           "final_grad_norm": model.final_grad_norm, "out": args.out})
    return 0


def _cmd_infer_lbp(args):
    graph = load_graph(args.graph)
    priors = _load_priors(args.priors, graph.node_count)
    result = lbp_run(Pmrf(graph, priors, args.w), max_iters=args.max_iters,
                     tol=args.tol)
    _write_user_values(list(enumerate(result.posteriors.tolist())), args.out)
    sys.stderr.write(f"iterations={result.iterations} converged={result.converged}\n")
    return 0


def _cmd_infer_linear(args):
    graph = load_graph(args.graph)
    priors = _load_priors(args.priors, graph.node_count)
    w_hat = args.w - 0.5
    if w_hat < 0:
        raise ValidationError("homophily strength w must be at least 0.5")
    if args.check_convergence:
        report = convergence_report(graph, w_hat)
        if report.verdict == "divergent":
            raise NumericalError(
                f"w_hat={w_hat:.6g} is at or beyond the necessary bound "
                f"1/(2*rho(M))={report.necessary_bound:.6g}")
    result = linear_iterate(graph, to_residual(priors), w_hat,
                            max_iters=args.max_iters, rel_tol=args.rel_tol)
    probs = to_probability(result.residuals, clamp=True)
    _write_user_values(list(enumerate(probs.tolist())), args.out)
    sys.stderr.write(f"iterations={result.iterations} converged={result.converged}\n")
    return 0


def _cmd_spectral(args):
    graph = load_graph(args.graph)
    report = convergence_report(graph, args.w_hat)
    _emit(report.to_dict(), args.out)
    return 0


def _cmd_train_clf(args):
    behaviors = load_behaviors(args.behaviors)
    labels = load_labels(args.labels)
    clf = train_classifier(_KIND_ALIASES[args.kind], behaviors, labels,
                           seed=args.seed, hidden_width=args.hidden,
                           learning_rate=args.lr, epochs=args.epochs,
                           batch_size=args.batch, l2=args.l2)
    save_classifier(clf, args.out)
    _emit({"kind": clf.kind, "classes": clf.class_count,
           "features": clf.feature_count, "out": args.out})
    return 0


def _cmd_panda(args):
    clf = load_classifier(args.clf)
    behaviors = load_behaviors(args.input)
    x = behaviors.row(args.user)
    grid = tuple(float(v) for v in args.grid.split(",")) if args.grid else None
    cfg = PandaConfig(step=args.tau, maxiter=args.maxiter, grid=grid)
    if args.baseline:
        result = find_noise_restricted_baseline(clf, x, args.target, cfg)
    else:
        result = find_noise(clf, x, args.target, args.policy, cfg)
    if grid is not None:
        result = quantize_noise(clf, x, result, grid)
    _emit(_noise_payload(result), args.out)
    return 0


def _cmd_defend(args):
    clf = load_classifier(args.defender)
    behaviors = load_behaviors(args.behaviors)
    grid = tuple(float(v) for v in args.grid.split(",")) if args.grid else None
    cfg = PandaConfig(step=args.tau, maxiter=args.maxiter, grid=grid)
    if args.target == "uniform":
        target = TargetDistribution.uniform(clf.class_count)
    else:
        if not args.train_labels:
            raise ValidationError("--target train needs --train-labels")
        target = TargetDistribution.from_labels(load_labels(args.train_labels))
        if target.probs.shape[0] != clf.class_count:
            raise ValidationError("training labels disagree with the classifier's classes")

    provenance = {}
    noisy_rows = []
    for u in range(behaviors.user_count):
        x = behaviors.row(u)
        record = defend_user(clf, x, args.policy, cfg, target, args.budget,
                             [args.seed, u])
        noisy_rows.append(record.noisy)
        provenance[u] = {
            "chosen_class": record.chosen_class,
            "distribution": [float(v) for v in record.distribution],
            "norms": [int(v) for v in record.norms],
            "reachable": [bool(v) for v in record.reachable],
            "fell_back": [bool(v) for v in record.fell_back],
            "binding": record.binding,
            "lam": None if np.isnan(record.lam) else record.lam,
            "mu0": None if np.isnan(record.mu0) else record.mu0,
            "degenerate": record.degenerate,
        }
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(f"# users={behaviors.user_count} objects={behaviors.object_count}\n")
        for u, row in enumerate(noisy_rows):
            for o in np.flatnonzero(row):
                fh.write(f"{u} {int(o)} {float(row[o])!r}\n")
    _emit(provenance, args.out + ".provenance.json")
    sys.stderr.write(f"defended {behaviors.user_count} users -> {args.out}\n")
    return 0


def _cmd_game_lp(args):
    table = _load_joint(args.joint)
    lp = build_lp(JointDistribution(table), beta=args.beta)
    defense = solve_lp(lp)
    _emit({"objective": defense.objective,
           "utility_loss": defense.utility_loss,
           "mapping": [[float(v) for v in row] for row in defense.mapping],
           "y": [float(v) for v in defense.y_values],
           "certificates": defense.certificates}, args.out)
    return 0


def _load_joint(path) -> np.ndarray:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValidationError(f"{path}: expected 's x prob' at line {lineno}")
            entries.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if not entries:
        raise ValidationError(f"{path}: empty joint distribution")
    s_count = max(e[0] for e in entries) + 1
    x_count = max(e[1] for e in entries) + 1
    table = np.zeros((s_count, x_count))
    for s, x, p in entries:
        table[s, x] = p
    return table


def _cmd_evaluate(args):
    if args.pipeline == "inference":
        cfg = pipeline.InferenceConfig(
            synth=_synth_config(args, args.seed), engine=args.engine,
            w=args.w, train_fraction=args.train_fraction)
        report = pipeline.run_inference_experiment(cfg)
        _emit({"engine": report.engine, "w": report.w,
               "accuracy": report.accuracy,
               "accuracy_prior_only": report.accuracy_prior_only,
               "auc": report.auc, "converged": report.converged,
               "iterations": report.iterations,
               "convergence": report.convergence.to_dict()}, args.out)
        return 0
    if not (args.pred and args.truth):
        raise ValidationError("evaluate needs --pred and --truth, or --pipeline inference")
    pred = load_labels(args.pred)
    truth = load_labels(args.truth)
    if set(pred.labels) != set(truth.labels):
        raise ValidationError("prediction and truth files cover different users")
    acc = inference_accuracy(pred.labels, truth.labels)
    if args.format == "json":
        _emit({"accuracy": acc, "users": len(truth.labels)}, args.out)
    else:
        _write_user_values([("accuracy", acc)], args.out)
    return 0


def _cmd_sweep(args):
    seeds = tuple(int(v) for v in args.seeds.split(","))
    betas = tuple(float(v) for v in args.betas.split(","))
    attackers = tuple(_KIND_ALIASES[k] for k in args.attackers.split(","))
    grid = tuple(float(v) for v in args.grid.split(",")) if args.grid else None
    cfg = pipeline.SweepConfig(
        synth=_synth_config(args, seeds[0]), betas=betas, policy=args.policy,
        panda=PandaConfig(step=args.tau, maxiter=args.maxiter, grid=grid),
        defender_kind=_KIND_ALIASES[args.defender_kind],
        attacker_kinds=attackers, target=args.target,
        train_fraction=args.train_fraction, seeds=seeds,
        hidden_width=args.hidden, epochs=args.epochs, learning_rate=args.lr)
    rows = pipeline.run_defense_sweep(cfg)
    pipeline.write_sweep_csv(rows, args.out)
    sys.stderr.write(f"wrote {len(rows)} rows -> {args.out}\n")
    return 0


# ---------------------------------------------------------------------------
# Parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="privattr",
        description="Graph-based attribute inference and the two-phase noise defense")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic world")
    _add_synth_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("train-prior", help="fit the binary behavior prior")
    p.add_argument("--behaviors", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--l2", type=float, default=1.0)
    p.add_argument("--max-epochs", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--priors-out", default=None,
                   help="also write 'user prior' lines for every user")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_prior)

    p = sub.add_parser("infer-lbp", help="posteriors via loopy belief propagation")
    p.add_argument("--graph", required=True)
    p.add_argument("--priors", required=True)
    p.add_argument("--w", type=float, default=0.8)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-3)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_infer_lbp)

    p = sub.add_parser("infer-linear", help="posteriors via the residual iteration")
    p.add_argument("--graph", required=True)
    p.add_argument("--priors", required=True)
    p.add_argument("--w", type=float, default=0.6)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--rel-tol", type=float, default=1e-3)
    p.add_argument("--check-convergence", action="store_true")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_infer_linear)

    p = sub.add_parser("spectral", help="spectral radius and convergence bounds")
    p.add_argument("--graph", required=True)
    p.add_argument("--w-hat", type=float, default=None,
                   help="residual homophily strength to classify")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_spectral)

    p = sub.add_parser("train-clf", help="train a multiclass classifier")
    p.add_argument("--kind", choices=("linear", "mlp"), required=True)
    p.add_argument("--behaviors", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--batch", type=int, default=32)
    p.add_argument("--l2", type=float, default=1e-4)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_train_clf)

    p = sub.add_parser("panda", help="policy-aware minimum-noise search")
    p.add_argument("--clf", required=True)
    p.add_argument("--input", required=True, help="behaviors file")
    p.add_argument("--user", type=int, required=True)
    p.add_argument("--target", type=int, required=True)
    p.add_argument("--policy", choices=POLICIES, default=POLICY_MODIFY_ADD)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--maxiter", type=int, default=200)
    p.add_argument("--grid", default=None, help="comma-separated rating grid")
    p.add_argument("--baseline", action="store_true",
                   help="direction-committed baseline instead of the policy-aware search")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_panda)

    p = sub.add_parser("defend", help="defend every user in a behaviors file")
    p.add_argument("--defender", required=True, help="classifier file")
    p.add_argument("--behaviors", required=True)
    p.add_argument("--policy", choices=POLICIES, default=POLICY_MODIFY_ADD)
    p.add_argument("--target", choices=("uniform", "train"), default="train")
    p.add_argument("--train-labels", default=None)
    p.add_argument("--budget", type=float, required=True)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--maxiter", type=int, default=200)
    p.add_argument("--grid", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="noisy behaviors file")
    p.set_defaults(func=_cmd_defend)

    p = sub.add_parser("game-lp", help="micro-scale game-theoretic defense LP")
    p.add_argument("--joint", required=True, help="file of 's x prob' lines")
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_game_lp)

    p = sub.add_parser("evaluate", help="score predictions or run the inference pipeline")
    p.add_argument("--pred", default=None)
    p.add_argument("--truth", default=None)
    p.add_argument("--pipeline", choices=("inference",), default=None)
    p.add_argument("--engine", choices=(pipeline.ENGINE_LINEAR, pipeline.ENGINE_LBP),
                   default=pipeline.ENGINE_LINEAR)
    p.add_argument("--w", type=float, default=None)
    p.add_argument("--train-fraction", type=float, default=0.5)
    _add_synth_args(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=("tsv", "json"), default="tsv")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("sweep", help="defense sweep over a budget grid")
    _add_synth_args(p, multiclass_default=True)
    p.add_argument("--betas", default="0,1,2,4,8")
    p.add_argument("--seeds", default="1")
    p.add_argument("--policy", choices=POLICIES, default=POLICY_MODIFY_ADD)
    p.add_argument("--target", choices=("uniform", "train"), default="train")
    p.add_argument("--attackers", default="linear,mlp")
    p.add_argument("--defender-kind", choices=("linear", "mlp"), default="linear")
    p.add_argument("--train-fraction", type=float, default=0.6)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--maxiter", type=int, default=200)
    p.add_argument("--grid", default=None)
    p.add_argument("--hidden", type=int, default=16)
    p.add_argument("--epochs", type=int, default=300)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    except NumericalError as exc:
        sys.stderr.write(f"numerical error: {exc}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
