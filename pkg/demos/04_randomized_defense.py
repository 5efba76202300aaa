"""The budgeted randomized defense, end to end.

Phase I finds one representative noise per attribute value.  Phase II
samples among them from the distribution closest (in KL divergence) to a
target distribution subject to an expected noise-size budget; the solution
comes from the stationarity conditions with a Newton solve for the
equality multiplier.  Sweeping the budget trades privacy against utility.
"""

import numpy as np

from privattr import (KIND_LINEAR, KIND_MLP, SynthConfig, TargetDistribution,
                      gen_synthetic, kl_divergence, solve_mechanism,
                      train_classifier)
from privattr.mechanism import find_all_noises, select_noise
from privattr.pipeline import split_train_test

print("=" * 64)
print("1. The mechanism in isolation")
print("=" * 64)
p = TargetDistribution(np.array([0.2, 0.3, 0.5]))
norms = [0, 2, 5]
print(f"target {p.probs}, noise sizes {norms}")
for beta in (4.0, 1.5, 0.5):
    sol = solve_mechanism(p, norms, beta)
    print(f"beta={beta:4.1f} -> dist {np.round(sol.distribution, 4)} "
          f"binding={sol.binding} expected cost={sol.expected_cost:.3f} "
          f"KL={kl_divergence(p.probs, sol.distribution):.4f}")
print("A slack budget reproduces the target; tighter budgets shift mass")
print("onto cheaper noises, never exceeding the expected-cost cap.")

print()
print("=" * 64)
print("2. Defending 150 users against independent attackers")
print("=" * 64)

cfg = SynthConfig(node_count=400, intra_p=0.02, inter_p=0.002,
                  proportions=(0.2,) * 5, signal_strength=0.8, seed=4)
_, behaviors, labels = gen_synthetic(cfg)
train_users, test_users = split_train_test(labels, 0.6, seed=0)
X_train = behaviors.matrix[np.asarray(train_users)].toarray()
y_train = labels.vector(np.asarray(train_users))
X_test = behaviors.matrix[np.asarray(test_users)].toarray()
y_test = labels.vector(np.asarray(test_users))

defender = train_classifier(KIND_LINEAR, X_train, y_train, 5, seed=11)
attacker_lr = train_classifier(KIND_LINEAR, X_train, y_train, 5, seed=12)
attacker_nn = train_classifier(KIND_MLP, X_train, y_train, 5, seed=13)
target = TargetDistribution.from_labels(labels.restrict(train_users))

# Phase I once per user; only the sampling distribution depends on the budget
noise_sets = [find_all_noises(defender, x, "modify-add") for x in X_test]

print(f"{'beta':>5} {'matched attacker':>17} {'network attacker':>17} {'mean noise':>11}")
for beta in (0.0, 1.0, 2.0, 4.0, 8.0):
    noisy = np.empty_like(X_test)
    sizes = []
    for ui, x in enumerate(X_test):
        record = select_noise(x, noise_sets[ui], target, beta, [4, int(beta * 10), ui])
        noisy[ui] = record.noisy
        sizes.append(np.count_nonzero(record.noisy - x))
    acc_lr = np.mean(attacker_lr.predict_many(noisy) == y_test)
    acc_nn = np.mean(attacker_nn.predict_many(noisy) == y_test)
    print(f"{beta:5.1f} {acc_lr:>17.3f} {acc_nn:>17.3f} {np.mean(sizes):>11.2f}")

print()
print("Noise crafted against the defender's own classifier transfers to")
print("independently trained attackers; a handful of modified entries take")
print("their accuracy toward the base-rate guess.")
