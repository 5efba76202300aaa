"""The game-theoretic defense LP on domains tiny enough to solve exactly.

Against an attacker who best-responds to the published mapping, the
optimal defense is a linear program over the probabilistic mapping
f(x' | x).  Its size is exponential in the public-data dimensionality,
which is precisely why the two-phase defense exists; at micro scale the LP
doubles as an exactness oracle.
"""

import numpy as np

from privattr import JointDistribution, build_lp, solve_lp
from privattr.game_lp import enumerate_deterministic_defenses

print("=" * 64)
print("1. Perfectly correlated attribute and public value")
print("=" * 64)
joint = JointDistribution(np.array([[0.5, 0.0], [0.0, 0.5]]))
print("joint Pr(s, x):")
print(joint.table)
print(f"{'beta':>5} {'LP optimum':>11} {'best deterministic':>19}")
for beta in (0.0, 0.1, 0.25, 0.4, 0.5):
    lp = build_lp(joint, beta=beta)
    defense = solve_lp(lp)
    best_det = min(enumerate_deterministic_defenses(lp))
    print(f"{beta:5.2f} {defense.objective:>11.4f} {best_det:>19.4f}")
print("With no budget the attacker reads the attribute straight off the")
print("data (objective 1.0); by budget 0.5 full mixing drives it to the")
print("0.5 prior guess.  Randomized mappings dominate all deterministic")
print("ones at every intermediate budget.")

print()
print("=" * 64)
print("2. The optimal mapping at beta = 0.25")
print("=" * 64)
defense = solve_lp(build_lp(joint, beta=0.25))
print("f(x' | x):")
print(np.round(defense.mapping, 4))
print(f"objective {defense.objective:.4f}, expended utility "
      f"{defense.utility_loss:.4f}, worst certificate violation "
      f"{max(defense.certificates.values()):.2e}")

print()
print("=" * 64)
print("3. Independent joint: noise cannot help or hurt")
print("=" * 64)
independent = JointDistribution(np.outer([0.7, 0.3], [0.4, 0.6]))
for beta in (0.0, 0.5, 1.0):
    defense = solve_lp(build_lp(independent, beta=beta))
    print(f"beta={beta:3.1f}: objective {defense.objective:.4f} "
          "(= the 0.7 prior guess, at every budget)")
