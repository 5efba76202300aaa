"""Micro-scale game-theoretic defense as a linear program.

Against an attacker who knows both the joint distribution Pr(s, x) and the
defender's probabilistic mapping f(x' | x), the defender minimizes the
attacker's optimal expected privacy gain subject to an expected
utility-loss budget.  With one auxiliary variable y_{x'} per noisy value
standing for the attacker's best response, the problem is the LP

    minimize   sum_{x'} y_{x'}
    subject to sum_{x, x'} Pr(x) f(x'|x) d_q(x, x')  <=  beta
               y_{x'} >= sum_{s, x} Pr(s, x) f(x'|x) d_p(s, s_hat)   for all x', s_hat
               sum_{x'} f(x'|x) = 1                                  for all x
               f >= 0.

The construction is exponential in the public-data dimensionality, so the
domains are hard-capped (|S| <= 4, |X| <= 8); this module exists as an
exactness oracle on micro instances, not as a scalable defense.  Solved
with scipy's HiGHS backend.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import NumericalError, ValidationError

MAX_ATTRIBUTE_VALUES = 4
MAX_PUBLIC_VALUES = 8
CERT_TOL = 1e-9


@dataclass(frozen=True)
class JointDistribution:
    """Dense joint Pr(s, x) over tiny attribute and public-data domains."""

    table: np.ndarray

    def __post_init__(self):
        table = np.asarray(self.table, dtype=np.float64)
        if table.ndim != 2:
            raise ValidationError("joint distribution must be a 2-d table")
        s_count, x_count = table.shape
        if s_count < 2 or x_count < 2:
            raise ValidationError("need at least two attribute and two public values")
        if s_count > MAX_ATTRIBUTE_VALUES or x_count > MAX_PUBLIC_VALUES:
            raise ValidationError(
                f"domain too large for the exact LP "
                f"(max {MAX_ATTRIBUTE_VALUES} x {MAX_PUBLIC_VALUES}); "
                "the construction is exponential in the data dimensionality")
        if np.any(table < 0):
            raise ValidationError("joint probabilities must be nonnegative")
        if abs(table.sum() - 1.0) > 1e-9:
            raise ValidationError("joint probabilities must sum to 1")
        object.__setattr__(self, "table", table)

    @property
    def attribute_count(self) -> int:
        return self.table.shape[0]

    @property
    def public_count(self) -> int:
        return self.table.shape[1]

    def x_marginal(self) -> np.ndarray:
        return self.table.sum(axis=0)


def zero_one_privacy_loss(s_count: int) -> np.ndarray:
    """d_p(s, s_hat) = 1 exactly when the attacker guesses correctly."""
    return np.eye(s_count)


def zero_one_utility_loss(x_count: int) -> np.ndarray:
    """d_q(x, x') = 1 whenever the public value changes."""
    return 1.0 - np.eye(x_count)


@dataclass
class GameLp:
    """Explicit LP data: minimize c @ z s.t. A_ub z <= b_ub, A_eq z = b_eq.

    Variables are laid out as the |X|^2 mapping entries f[x, x'] in row-major
    order followed by the |X| auxiliary y values.
    """

    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray
    A_eq: np.ndarray
    b_eq: np.ndarray
    bounds: list
    joint: JointDistribution
    d_p: np.ndarray
    d_q: np.ndarray
    beta: float

    @property
    def n_variables(self) -> int:
        return self.c.shape[0]

    @property
    def n_inequalities(self) -> int:
        return self.A_ub.shape[0]

    @property
    def n_equalities(self) -> int:
        return self.A_eq.shape[0]

    def f_index(self, x: int, x_prime: int) -> int:
        return x * self.joint.public_count + x_prime

    def y_index(self, x_prime: int) -> int:
        return self.joint.public_count ** 2 + x_prime


def build_lp(joint: JointDistribution, d_p=None, d_q=None, beta: float = 1.0) -> GameLp:
    """Assemble the defense LP for a micro instance.

    ``d_p`` defaults to 0-1 privacy loss (1 iff the guess is correct) and
    ``d_q`` to 0-1 utility loss on changed values.  Constraint layout: one
    budget row, |X| * |S| dominance rows, |X| stochasticity rows.
    """
    if beta < 0:
        raise ValidationError("utility-loss budget must be nonnegative")
    S, X = joint.attribute_count, joint.public_count
    d_p = zero_one_privacy_loss(S) if d_p is None else np.asarray(d_p, dtype=np.float64)
    d_q = zero_one_utility_loss(X) if d_q is None else np.asarray(d_q, dtype=np.float64)
    if d_p.shape != (S, S):
        raise ValidationError(f"privacy loss matrix must be {S} x {S}")
    if d_q.shape != (X, X):
        raise ValidationError(f"utility loss matrix must be {X} x {X}")

    n_f = X * X
    n_vars = n_f + X
    c = np.zeros(n_vars)
    c[n_f:] = 1.0

    px = joint.x_marginal()
    budget_row = np.zeros(n_vars)
    for x in range(X):
        for xp in range(X):
            budget_row[x * X + xp] = px[x] * d_q[x, xp]

    dominance = np.zeros((X * S, n_vars))
    for xp in range(X):
        for s_hat in range(S):
            row = dominance[xp * S + s_hat]
            # sum_s sum_x Pr(s, x) d_p(s, s_hat) f[x, xp] - y_xp <= 0
            weight = d_p[:, s_hat] @ joint.table  # length X, indexed by x
            for x in range(X):
                row[x * X + xp] = weight[x]
            row[n_f + xp] = -1.0

    A_ub = np.vstack([budget_row, dominance])
    b_ub = np.concatenate([[beta], np.zeros(X * S)])

    A_eq = np.zeros((X, n_vars))
    for x in range(X):
        A_eq[x, x * X:(x + 1) * X] = 1.0
    b_eq = np.ones(X)

    bounds = [(0.0, None)] * n_f + [(None, None)] * X
    return GameLp(c, A_ub, b_ub, A_eq, b_eq, bounds, joint, d_p, d_q, float(beta))


@dataclass
class LpDefense:
    mapping: np.ndarray          # row-stochastic f(x' | x)
    y_values: np.ndarray
    objective: float
    budget: float
    utility_loss: float
    certificates: dict

    def attacker_payoff(self, joint: JointDistribution, d_p: np.ndarray) -> float:
        """Recompute the optimal attacker's expected privacy gain under f."""
        X = joint.public_count
        total = 0.0
        for xp in range(X):
            gains = [float(sum(d_p[s, s_hat] * joint.table[s, x] * self.mapping[x, xp]
                               for s in range(joint.attribute_count)
                               for x in range(X)))
                     for s_hat in range(joint.attribute_count)]
            total += max(gains)
        return total


def solve_lp(lp: GameLp) -> LpDefense:
    """Solve the micro LP exactly and attach feasibility certificates.

    The identity mapping is always feasible when changed values cost at
    most the budget allows for zero noise (d_q diagonal zero), so HiGHS
    failures are reported as numerical errors rather than infeasibility.
    Certificates record the worst violation of the budget, stochasticity,
    dominance, and complementary slackness at the returned point.
    """
    result = optimize.linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub,
                              A_eq=lp.A_eq, b_eq=lp.b_eq,
                              bounds=lp.bounds, method="highs")
    if not result.success:
        raise NumericalError(f"LP solve failed: {result.message}")
    X = lp.joint.public_count
    z = result.x
    mapping = z[:X * X].reshape(X, X)
    y_values = z[X * X:]

    slack_ub = lp.b_ub - lp.A_ub @ z
    utility_loss = float(lp.A_ub[0] @ z)
    duals = getattr(result, "ineqlin", None)
    comp_slack = 0.0
    if duals is not None:
        comp_slack = float(np.abs(np.asarray(duals.marginals) * slack_ub).max())
    certificates = {
        "budget_violation": max(0.0, utility_loss - lp.beta),
        "stochasticity": float(np.abs(lp.A_eq @ z - lp.b_eq).max()),
        "dominance_violation": max(0.0, float(-slack_ub[1:].min()) if slack_ub.shape[0] > 1 else 0.0),
        "nonnegativity": max(0.0, float(-mapping.min())),
        "complementary_slackness": comp_slack,
    }
    return LpDefense(mapping, y_values, float(result.fun), lp.beta,
                     utility_loss, certificates)


def enumerate_deterministic_defenses(lp: GameLp):
    """Objective values of every feasible deterministic mapping.

    Exhaustive over the X^X functions x -> x'; used as the randomization
    dominance oracle on micro instances.
    """
    joint, d_p, d_q = lp.joint, lp.d_p, lp.d_q
    X = joint.public_count
    px = joint.x_marginal()
    values = []
    for code in range(X ** X):
        assignment = [(code // (X ** x)) % X for x in range(X)]
        loss = sum(px[x] * d_q[x, assignment[x]] for x in range(X))
        if loss > lp.beta + 1e-12:
            continue
        mapping = np.zeros((X, X))
        for x in range(X):
            mapping[x, assignment[x]] = 1.0
        defense = LpDefense(mapping, np.zeros(X), 0.0, lp.beta, float(loss), {})
        values.append(defense.attacker_payoff(joint, d_p))
    return values
