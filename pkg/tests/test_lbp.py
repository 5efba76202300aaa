import numpy as np
import pytest

from privattr import (Pmrf, SocialGraph, ValidationError, cycle_graph,
                      exact_marginals, lbp_run, path_graph)


def _two_node(q_u=0.9, q_v=0.5, w=0.8):
    g = SocialGraph.from_edges(2, [(0, 1)])
    return Pmrf(g, np.array([q_u, q_v]), w)


def _random_tree(rng, n):
    """Uniform random labeled tree edges via a growing attachment."""
    edges = [(int(rng.integers(0, k)), k) for k in range(1, n)]
    return SocialGraph.from_edges(n, edges)


class TestPmrf:
    def test_w_bounds(self):
        g = SocialGraph.from_edges(2, [(0, 1)])
        for w in (0.5, 1.0, 0.2):
            with pytest.raises(ValidationError):
                Pmrf(g, np.array([0.5, 0.5]), w)

    def test_prior_bounds(self):
        g = SocialGraph.from_edges(2, [(0, 1)])
        with pytest.raises(ValidationError):
            Pmrf(g, np.array([1.2, 0.5]), 0.8)


class TestExactMarginals:
    def test_single_node_returns_prior(self):
        g = SocialGraph.from_edges(1, [])
        p = exact_marginals(Pmrf(g, np.array([0.3]), 0.8))
        assert p[0] == pytest.approx(0.3, abs=1e-15)

    def test_two_node_case_hand_computed(self):
        # joint weights: ++ 0.36, +- 0.09, -+ 0.01, -- 0.04; Z = 0.5
        p = exact_marginals(_two_node())
        assert p[1] == pytest.approx(0.74, abs=1e-12)
        assert p[0] == pytest.approx(0.90, abs=1e-12)

    def test_triangle_with_flat_priors_is_symmetric(self):
        g = SocialGraph.from_edges(3, [(0, 1), (1, 2), (0, 2)])
        for w in (0.6, 0.8, 0.95):
            p = exact_marginals(Pmrf(g, np.full(3, 0.5), w))
            assert np.allclose(p, 0.5, atol=1e-12)

    def test_refuses_large_graphs(self):
        g = SocialGraph.from_edges(21, [(i, i + 1) for i in range(20)])
        with pytest.raises(ValidationError, match="capped"):
            exact_marginals(Pmrf(g, np.full(21, 0.5), 0.8))


class TestLbpRun:
    def test_isolated_node_posterior_equals_prior(self):
        g = SocialGraph.from_edges(3, [(0, 1)])
        res = lbp_run(Pmrf(g, np.array([0.5, 0.5, 0.7]), 0.8))
        assert res.posteriors[2] == pytest.approx(0.7, abs=1e-12)

    def test_w_near_half_posteriors_approach_priors(self):
        g = SocialGraph.from_edges(2, [(0, 1)])
        priors = np.array([0.9, 0.2])
        res = lbp_run(Pmrf(g, priors, 0.5 + 1e-9), max_iters=200, tol=1e-12)
        assert np.allclose(res.posteriors, priors, atol=1e-6)

    def test_two_node_message_and_posterior(self):
        res = lbp_run(_two_node(), max_iters=50, tol=1e-12)
        assert res.converged
        assert res.posteriors[1] == pytest.approx(0.74, abs=1e-9)
        assert res.message(0, 1) == pytest.approx(0.74, abs=1e-9)

    def test_prior_dominance_exact_halves(self):
        g = cycle_graph(6)
        res = lbp_run(Pmrf(g, np.full(6, 0.5), 0.9), max_iters=17, tol=0.0)
        assert np.all(res.posteriors == 0.5)

    def test_monotone_evidence_on_two_node_graph(self):
        posts = []
        for q in np.linspace(0.05, 0.95, 10):
            res = lbp_run(_two_node(q_u=float(q)), max_iters=50, tol=1e-12)
            posts.append(res.posteriors[1])
        assert all(a < b for a, b in zip(posts, posts[1:]))

    def test_tree_exactness_against_enumeration(self):
        rng = np.random.default_rng(123)
        for _ in range(10):
            n = int(rng.integers(2, 13))
            g = _random_tree(rng, n)
            priors = rng.uniform(0.05, 0.95, size=n)
            w = float(rng.uniform(0.55, 0.95))
            pmrf = Pmrf(g, priors, w)
            res = lbp_run(pmrf, max_iters=100, tol=1e-12)
            assert res.converged
            exact = exact_marginals(pmrf)
            assert np.abs(res.posteriors - exact).max() <= 1e-9

    def test_automorphism_permutes_posteriors(self):
        # the path 0-1-2 maps onto itself under the flip 0 <-> 2
        g = path_graph(3)
        priors = np.array([0.9, 0.4, 0.3])
        flipped = priors[::-1].copy()
        a = lbp_run(Pmrf(g, priors, 0.8), max_iters=60, tol=1e-12)
        b = lbp_run(Pmrf(g, flipped, 0.8), max_iters=60, tol=1e-12)
        assert np.allclose(a.posteriors, b.posteriors[::-1], atol=1e-12)

    def test_unconverged_loopy_graph_still_reports(self):
        g = cycle_graph(4)
        res = lbp_run(Pmrf(g, np.array([0.9, 0.1, 0.9, 0.1]), 0.99),
                      max_iters=3, tol=1e-15)
        assert not res.converged
        assert res.iterations == 3
        assert np.all(np.isfinite(res.posteriors))

    def test_extreme_priors_do_not_break(self):
        g = path_graph(3)
        res = lbp_run(Pmrf(g, np.array([1.0, 0.5, 0.0]), 0.8),
                      max_iters=60, tol=1e-12)
        exact = exact_marginals(Pmrf(g, np.array([1.0, 0.5, 0.0]), 0.8))
        assert np.abs(res.posteriors - exact).max() <= 1e-9
