"""Graph-based private-attribute inference and a two-phase noise defense.

The inference half learns per-user attribute priors from behaviors,
couples users through a homophilic pairwise MRF over the social graph, and
estimates posteriors either by loopy belief propagation or by an
equivalent linearized sparse iteration whose convergence is governed by
the adjacency spectral radius.  The defense half, given any differentiable
classifier, finds one minimum evasion noise per attribute value under a
noise-type policy and then samples among them from the KL-optimal
budget-constrained distribution.

All stochastic operations take explicit seeds and are backed by numpy's
PCG64 generator (``np.random.default_rng``).
"""

from .errors import (DivergenceError, NumericalError, PrivattrError,
                     ValidationError)
from .graphs import (BehaviorMatrix, LabelSet, SocialGraph, SynthConfig,
                     complete_graph, cycle_graph, gen_synthetic, load_behaviors,
                     load_graph, load_labels, path_graph, ring_lattice,
                     save_behaviors, save_graph, save_labels, star_graph)
from .prior import (BinaryLrModel, load_prior_model, predict_prior,
                    prior_vector, save_prior_model, train_prior)
from .lbp import LbpResult, Pmrf, exact_marginals, lbp_run
from .linear import (ConvergenceReport, LinearResult, convergence_report,
                     linear_iterate, predict_from_residual, simplified_message,
                     spectral_radius, to_probability, to_residual)
from .classifiers import (KIND_LINEAR, KIND_MLP, LinearOvaClassifier,
                          OneHiddenReluClassifier, decision_values,
                          input_gradient, load_classifier, predict,
                          save_classifier, train_classifier)
from .noise_search import (NoiseResult, PandaConfig, POLICIES,
                           POLICY_ADD_NEW, POLICY_MODIFY_ADD,
                           POLICY_MODIFY_EXIST, find_noise,
                           find_noise_restricted_baseline, quantize_noise)
from .mechanism import (DefenseRecord, MechanismSolution, TargetDistribution,
                        defend_user, find_all_noises, kl_divergence,
                        sample_noise, select_noise, solve_mechanism)
from .game_lp import (GameLp, JointDistribution, LpDefense, build_lp,
                      enumerate_deterministic_defenses, solve_lp,
                      zero_one_privacy_loss, zero_one_utility_loss)
from .metrics import inference_accuracy, rank_auc
from .pipeline import (InferenceConfig, InferenceReport, SweepConfig,
                       run_defense_sweep, run_inference_experiment,
                       split_train_test, write_sweep_csv)

__version__ = "0.1.0"
