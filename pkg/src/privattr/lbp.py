"""Pairwise MRF over the social graph and loopy belief propagation.

The model couples binary states through a single homophily strength
w in (0.5, 1): node potentials are (q_u, 1 - q_u) and the edge potential is
w when endpoints agree, 1 - w otherwise.  Messages are updated
synchronously (Jacobi sweeps over two buffers), normalized so that
m(+1) + m(-1) = 1, and combined in the log domain to avoid underflow on
high-degree nodes.  Initial messages are the uninformative 0.5.

``exact_marginals`` enumerates all 2^|V| joint states (|V| <= 20) and is
the oracle the propagation is tested against.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .errors import NumericalError, ValidationError
from .graphs import SocialGraph

ENUMERATION_CAP = 20


@dataclass(frozen=True, eq=False)
class Pmrf:
    graph: SocialGraph
    priors: np.ndarray
    w: float

    def __post_init__(self):
        priors = np.asarray(self.priors, dtype=np.float64)
        if priors.shape != (self.graph.node_count,):
            raise ValidationError("priors must hold one probability per node")
        if np.any(priors < 0) or np.any(priors > 1):
            raise ValidationError("priors must lie in [0, 1]")
        if not (0.5 < self.w < 1.0):
            raise ValidationError("homophily strength w must lie in (0.5, 1)")
        object.__setattr__(self, "priors", priors)


@dataclass
class LbpResult:
    posteriors: np.ndarray
    iterations: int
    converged: bool
    message_values: np.ndarray   # value m(x=+1) per directed edge
    message_sources: np.ndarray
    message_targets: np.ndarray

    def message(self, v: int, u: int) -> float:
        """Final message sent from v to u (its +1 component)."""
        hits = np.flatnonzero((self.message_sources == v) & (self.message_targets == u))
        if hits.size == 0:
            raise ValidationError(f"no directed edge {v} -> {u}")
        return float(self.message_values[hits[0]])


def _directed_edges(graph: SocialGraph):
    """Source, target, and reverse-edge index arrays, one row per direction."""
    e = len(graph.edges)
    src = np.empty(2 * e, dtype=np.int64)
    dst = np.empty(2 * e, dtype=np.int64)
    rev = np.empty(2 * e, dtype=np.int64)
    for i, (u, v) in enumerate(graph.edges):
        src[2 * i], dst[2 * i] = u, v
        src[2 * i + 1], dst[2 * i + 1] = v, u
        rev[2 * i], rev[2 * i + 1] = 2 * i + 1, 2 * i
    return src, dst, rev


def lbp_run(pmrf: Pmrf, max_iters: int = 100, tol: float = 1e-3) -> LbpResult:
    """Synchronous loopy belief propagation.

    Each sweep recomputes every directed message from the previous sweep's
    buffer; the loop halts when the total l1 change of the messages drops
    below ``tol`` or after ``max_iters`` sweeps.  Posteriors are reported
    either way, with ``converged`` recording which case occurred
    (oscillation on loopy graphs is expected behavior, not an error).
    """
    if max_iters < 1:
        raise ValidationError("max_iters must be at least 1")
    graph, q, w = pmrf.graph, pmrf.priors, pmrf.w
    n = graph.node_count
    src, dst, rev = _directed_edges(graph)
    with np.errstate(divide="ignore"):
        log_q1 = np.log(q)
        log_q0 = np.log1p(-q)

    msgs = np.full(src.shape[0], 0.5)
    converged = False
    iterations = 0
    for t in range(1, max_iters + 1):
        with np.errstate(divide="ignore"):
            log_m1 = np.log(msgs)
            log_m0 = np.log1p(-msgs)
        # per-node totals over incoming messages, then divide out the
        # reverse message so v -> u excludes what u sent to v
        sum1 = log_q1.copy()
        sum0 = log_q0.copy()
        np.add.at(sum1, dst, log_m1)
        np.add.at(sum0, dst, log_m0)
        a1 = sum1[src] - log_m1[rev]
        a0 = sum0[src] - log_m0[rev]
        peak = np.maximum(a1, a0)
        with np.errstate(invalid="ignore"):
            e1 = np.exp(a1 - peak)
            e0 = np.exp(a0 - peak)
        num = e1 * w + e0 * (1.0 - w)
        den = e1 * (1.0 - w) + e0 * w
        new_msgs = num / (num + den)
        if not np.all(np.isfinite(new_msgs)):
            bad = int(np.flatnonzero(~np.isfinite(new_msgs))[0])
            raise NumericalError(
                f"non-finite message on directed edge {src[bad]} -> {dst[bad]} at sweep {t}")
        change = float(np.abs(new_msgs - msgs).sum())
        msgs = new_msgs
        iterations = t
        if change < tol:
            converged = True
            break

    with np.errstate(divide="ignore"):
        log_m1 = np.log(msgs)
        log_m0 = np.log1p(-msgs)
    tot1 = log_q1.copy()
    tot0 = log_q0.copy()
    np.add.at(tot1, dst, log_m1)
    np.add.at(tot0, dst, log_m0)
    posteriors = expit(tot1 - tot0)
    if n and not np.all(np.isfinite(posteriors)):
        bad = int(np.flatnonzero(~np.isfinite(posteriors))[0])
        raise NumericalError(f"non-finite posterior for node {bad}")
    return LbpResult(posteriors, iterations, converged, msgs, src, dst)


def exact_marginals(pmrf: Pmrf) -> np.ndarray:
    """Exact Pr(x_u = +1) by summing the joint over all 2^|V| states.

    Refuses graphs with more than 20 nodes; this is the small-instance
    oracle, not an inference engine.
    """
    graph, q, w = pmrf.graph, pmrf.priors, pmrf.w
    n = graph.node_count
    if n > ENUMERATION_CAP:
        raise ValidationError(
            f"exact enumeration is capped at {ENUMERATION_CAP} nodes, got {n}")
    states = np.arange(1 << n, dtype=np.int64)
    log_weight = np.zeros(states.shape[0])
    with np.errstate(divide="ignore"):
        log_q1 = np.log(q)
        log_q0 = np.log1p(-q)
    bits = [(states >> u) & 1 for u in range(n)]
    for u in range(n):
        log_weight += np.where(bits[u] == 1, log_q1[u], log_q0[u])
    log_agree = np.log(w)
    log_disagree = np.log1p(-w)
    for u, v in graph.edges:
        log_weight += np.where(bits[u] == bits[v], log_agree, log_disagree)

    peak = log_weight.max()
    weight = np.exp(log_weight - peak)
    z = weight.sum()
    if not np.isfinite(z) or z <= 0:
        raise NumericalError("degenerate partition function in enumeration")
    marginals = np.empty(n)
    for u in range(n):
        marginals[u] = weight[bits[u] == 1].sum() / z
    return marginals
