"""Phase II of the defense: the randomized noise-selection mechanism.

Given one representative noise per class with support sizes n_i = ||r_i||_0
and a strictly positive target distribution p, the mechanism is the
distribution S minimizing KL(p || S) subject to the expected-cost budget
sum_i S_i * n_i <= beta.  When the budget is slack the optimum is S = p.
Otherwise the stationarity conditions give

    S_i = p_i / (mu0 * n_i + lam),     mu0 = (1 - lam) / beta,

and lam solves the scalar equation "expected cost equals beta", which is
handled by Newton's method inside a hard bisection bracket.  The returned
multipliers (lam, mu0) certify the solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError, ValidationError
from .graphs import LabelSet
from .noise_search import PandaConfig, find_noise, quantize_noise

UNREACHABLE_SENTINEL = -1  # marks classes whose noise search failed


@dataclass(frozen=True)
class TargetDistribution:
    """Strictly positive distribution over the m attribute values."""

    probs: np.ndarray
    provenance: str = "custom"

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=np.float64)
        if probs.ndim != 1 or probs.shape[0] < 2:
            raise ValidationError("target distribution needs at least two classes")
        if np.any(probs <= 0):
            raise ValidationError("target probabilities must be strictly positive")
        if abs(probs.sum() - 1.0) > 1e-12:
            raise ValidationError("target probabilities must sum to 1")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, class_count: int) -> "TargetDistribution":
        return cls(np.full(class_count, 1.0 / class_count), "uniform")

    @classmethod
    def from_labels(cls, labels: LabelSet) -> "TargetDistribution":
        """Class frequencies of a multiclass label set (every class present)."""
        if labels.binary:
            raise ValidationError("training-based targets need multiclass labels")
        counts = np.zeros(labels.class_count)
        for lab in labels.labels.values():
            counts[lab - 1] += 1
        if np.any(counts == 0):
            absent = int(np.flatnonzero(counts == 0)[0]) + 1
            raise ValidationError(
                f"class {absent} absent from the labels; a training-based target needs every class")
        return cls(counts / counts.sum(), "training")


def kl_divergence(p, q) -> float:
    """KL(p || q) = sum p_i ln(p_i / q_i), with 0 * ln(0 / q) = 0.

    Returns math.inf when some q_i is zero where p_i > 0.
    """
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape:
        raise ValidationError("distributions must have the same length")
    if np.any(p < 0) or np.any(q < 0):
        raise ValidationError("probabilities must be nonnegative")
    active = p > 0
    if np.any(q[active] == 0):
        return math.inf
    return float(np.sum(p[active] * np.log(p[active] / q[active])))


@dataclass
class MechanismSolution:
    distribution: np.ndarray
    lam: float
    mu0: float
    binding: bool
    expected_cost: float
    norms: np.ndarray

    def kkt_residuals(self, target: TargetDistribution) -> dict:
        """Stationarity, normalization, and cost residuals of the solution."""
        p = target.probs
        station = 0.0
        if self.binding:
            denom = self.mu0 * self.norms + self.lam
            station = float(np.abs(self.distribution - p / denom).max())
        mass = abs(float(self.distribution.sum()) - 1.0)
        cost = abs(self.expected_cost - float(self.distribution @ self.norms))
        return {"stationarity": station, "normalization": mass, "cost": cost}


def _cost_and_derivative(lam: float, p: np.ndarray, norms: np.ndarray, beta: float):
    # zero-norm classes contribute nothing to the cost, and excluding them
    # keeps the bracket endpoint lam = 0 evaluable
    costly = norms > 0
    mu0 = (1.0 - lam) / beta
    denom = mu0 * norms[costly] + lam
    if np.any(denom <= 0):
        raise NumericalError("KKT denominator left the positive region")
    cost = float(np.sum(p[costly] * norms[costly] / denom))
    # d denom / d lam = 1 - n_i / beta
    dcost = float(np.sum(-p[costly] * norms[costly]
                         * (1.0 - norms[costly] / beta) / denom ** 2))
    return cost, dcost


def solve_mechanism(target, norms, budget: float, newton_tol: float = 1e-10,
                    max_newton_iters: int = 200) -> MechanismSolution:
    """Solve for the sampling distribution under an expected-cost budget.

    ``target`` is a TargetDistribution or a plain probability vector;
    ``norms`` are the per-class noise support sizes.  If the budget is
    slack the target itself is returned (binding=False).  Otherwise Newton
    iterations on lam, safeguarded by bisection on a sign bracket, drive
    the cost residual |sum_i S_i n_i - beta| below ``newton_tol``.
    """
    if not isinstance(target, TargetDistribution):
        target = TargetDistribution(np.asarray(target, dtype=np.float64))
    p = target.probs
    norms = np.asarray(norms, dtype=np.float64)
    if norms.shape != p.shape:
        raise ValidationError("need one noise norm per class")
    if np.any(norms < 0):
        raise ValidationError("noise norms must be nonnegative")
    if budget <= 0:
        raise ValidationError("budget must be positive")

    plain_cost = float(p @ norms)
    if plain_cost <= budget:
        return MechanismSolution(p.copy(), 1.0, 0.0, False, plain_cost, norms)

    if budget <= float(norms.min()):
        raise ValidationError(
            f"budget {budget} is below the minimum achievable expected cost "
            f"{norms.min()}; every distribution violates it")

    def _mass_residual(lam: float) -> float:
        if lam <= 0 and np.any(norms == 0):
            return math.inf
        denom = (1.0 - lam) / budget * norms + lam
        return abs(float(np.sum(p / denom)) - 1.0)

    lo, hi = 0.0, 1.0
    f_lo, _ = _cost_and_derivative(lo, p, norms, budget)
    f_lo -= budget
    if abs(f_lo) <= newton_tol and _mass_residual(lo) <= newton_tol:
        # without zero-norm classes the root can sit exactly at lam = 0
        lam = lo
    else:
        # cost(0) = beta * (1 - P0) <= beta <= cost(1); the root lies inside
        lam = 0.5
        f, df = _cost_and_derivative(lam, p, norms, budget)
        f -= budget
        for _ in range(max_newton_iters):
            # the normalization residual scales like (mu0 / lam) * f, so both
            # must be driven down before the KKT certificate is trustworthy
            if abs(f) <= newton_tol and _mass_residual(lam) <= newton_tol:
                break
            if f > 0:
                hi = lam
            else:
                lo = lam
            step_ok = df != 0.0
            if step_ok:
                candidate = lam - f / df
                step_ok = lo < candidate < hi
            lam = candidate if step_ok else 0.5 * (lo + hi)
            f, df = _cost_and_derivative(lam, p, norms, budget)
            f -= budget
        else:
            raise NumericalError(
                f"mechanism solve did not reach tolerance {newton_tol}; residual {f:.3e}")

    mu0 = (1.0 - lam) / budget
    denom = mu0 * norms + lam
    dist = p / denom
    cost = float(dist @ norms)
    return MechanismSolution(dist, float(lam), float(mu0), True, cost, norms)


def sample_noise(solution: MechanismSolution, noises, seed_or_rng):
    """Draw one representative noise by inverse CDF on the seeded stream.

    Returns (class_label, noise).  Pass a Generator to draw a reproducible
    sequence across calls, or an int seed for a single reproducible draw.
    """
    if len(noises) != solution.distribution.shape[0]:
        raise ValidationError("need one noise vector per class")
    rng = (seed_or_rng if isinstance(seed_or_rng, np.random.Generator)
           else np.random.default_rng(seed_or_rng))
    cdf = np.cumsum(solution.distribution)
    cdf[-1] = max(cdf[-1], 1.0)  # guard the top bin against rounding
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    idx = min(idx, len(noises) - 1)
    return idx + 1, noises[idx]


@dataclass
class DefenseRecord:
    """Full provenance of one defended user."""

    noisy: np.ndarray
    chosen_class: int
    distribution: np.ndarray
    norms: np.ndarray            # UNREACHABLE_SENTINEL where no noise was found
    reachable: np.ndarray
    binding: bool
    lam: float
    mu0: float
    fell_back: np.ndarray
    degenerate: bool = False
    noises: list = field(default_factory=list, repr=False)


def find_all_noises(clf, x, policy: str, cfg: PandaConfig | None = None):
    """Phase I for every class: one NoiseResult per target value.

    The result for the currently predicted class is the zero noise.  When
    ``cfg.grid`` is set each noise is snapped to the grid before use.
    """
    cfg = cfg or PandaConfig()
    results = []
    for label in range(1, clf.class_count + 1):
        res = find_noise(clf, x, label, policy, cfg)
        if cfg.grid is not None:
            res = quantize_noise(clf, x, res, cfg.grid)
        results.append(res)
    return results


def select_noise(x, noise_results, target, budget: float, seed_or_rng,
                 newton_tol: float = 1e-10) -> DefenseRecord:
    """Phase II over precomputed noises: solve the mechanism and sample.

    Classes whose search failed are excluded from the support (their norm
    is recorded as a sentinel) and the target is renormalized over the
    reachable ones.  A zero budget degenerates to sampling among the
    zero-cost classes only, which is flagged on the record.
    """
    x = np.asarray(x, dtype=np.float64)
    if not isinstance(target, TargetDistribution):
        target = TargetDistribution(np.asarray(target, dtype=np.float64))
    m = len(noise_results)
    if target.probs.shape[0] != m:
        raise ValidationError("target distribution does not match the class count")
    reachable = np.asarray([res.success for res in noise_results], dtype=bool)
    if not reachable.any():
        raise NumericalError("no reachable class; cannot build a mechanism")
    norms_full = np.asarray(
        [res.l0 if res.success else UNREACHABLE_SENTINEL for res in noise_results],
        dtype=np.int64)
    norms = norms_full[reachable].astype(np.float64)
    p_sub = target.probs[reachable]
    p_sub = p_sub / p_sub.sum()

    degenerate = False
    if budget == 0.0:
        zero_cost = norms == 0.0
        if not zero_cost.any():
            raise ValidationError("zero budget with no zero-cost noise available")
        sub = np.where(zero_cost, p_sub, 0.0)
        sub /= sub.sum()
        solution = MechanismSolution(sub, math.nan, math.nan, True,
                                     0.0, norms)
        degenerate = True
    else:
        solution = solve_mechanism(TargetDistribution(p_sub, target.provenance),
                                   norms, budget, newton_tol)

    dist_full = np.zeros(m)
    dist_full[reachable] = solution.distribution
    full_solution = MechanismSolution(dist_full, solution.lam, solution.mu0,
                                      solution.binding, solution.expected_cost,
                                      norms_full.astype(np.float64))
    noises = [res.noise for res in noise_results]
    chosen, noise = sample_noise(full_solution, noises, seed_or_rng)
    return DefenseRecord(
        noisy=x + noise,
        chosen_class=chosen,
        distribution=dist_full,
        norms=norms_full,
        reachable=reachable,
        binding=solution.binding,
        lam=solution.lam,
        mu0=solution.mu0,
        fell_back=np.asarray([res.fell_back for res in noise_results], dtype=bool),
        degenerate=degenerate,
        noises=noises,
    )


def defend_user(clf, x, policy: str, cfg: PandaConfig | None, target,
                budget: float, seed_or_rng) -> DefenseRecord:
    """Run both phases for one user and return the defended vector.

    Finds one representative noise per class (zero for the predicted
    class), solves the budgeted mechanism over their support sizes, samples
    a class, and publishes x plus the sampled noise.
    """
    x = np.asarray(x, dtype=np.float64)
    results = find_all_noises(clf, x, policy, cfg)
    return select_noise(x, results, target, budget, seed_or_rng)
