import numpy as np
import pytest
from scipy import sparse

from asrc.exceptions import IsolatedNode
from asrc.graph import (
    SparseRowGraph,
    SparsitySchedule,
    advance_sparsity,
    build_row_graph,
    learn_row_probabilities,
    project_simplex,
    solve_prior_problem,
    sparsity_dual_value,
    symmetrize_normalize,
)
from asrc.numerics import pairwise_dist
from asrc.rng import SeededRng

from oracles import prior_problem_bruteforce, simplex_projection_dual_ascent


class TestProjectSimplex:
    def test_already_in_simplex(self):
        np.testing.assert_allclose(
            project_simplex(np.array([0.2, 0.3, 0.5])), [0.2, 0.3, 0.5], atol=1e-15
        )

    def test_equal_overfull(self):
        np.testing.assert_allclose(
            project_simplex(np.array([0.8, 0.8])), [0.5, 0.5], atol=1e-15
        )

    def test_single_winner(self):
        np.testing.assert_allclose(
            project_simplex(np.array([2.0, -1.0, 0.5])), [1.0, 0.0, 0.0], atol=1e-15
        )

    def test_matches_dual_ascent_oracle(self):
        gen = SeededRng(21).stream("proj")
        for _ in range(1000):
            k = int(gen.integers(1, 41))
            c = gen.standard_normal(k) * gen.uniform(0.1, 5.0)
            ours = project_simplex(c)
            oracle = simplex_projection_dual_ascent(c)
            np.testing.assert_allclose(ours, oracle, atol=1e-6)
            assert ours.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(ours >= 0)


class TestSolvePriorProblem:
    def test_uniform_prior_matches_closed_form(self):
        p = solve_prior_problem(np.array([1.0, 2.0, 4.0]), np.full(3, 1 / 3), 5.0, 2)
        np.testing.assert_allclose(p, [0.6, 0.4, 0.0], atol=1e-12)

    def test_huge_gamma_returns_prior(self):
        gen = SeededRng(22).stream("prior")
        q = project_simplex(gen.standard_normal(6))
        d = gen.uniform(0, 3, 6)
        p = solve_prior_problem(d, q, 1e12, 6)
        np.testing.assert_allclose(p, q, atol=1e-9)

    def test_matches_bruteforce_enumeration(self):
        gen = SeededRng(23).stream("prior")
        for _ in range(200):
            n = int(gen.integers(2, 9))
            k = int(gen.integers(1, min(3, n) + 1))
            d = gen.uniform(0.0, 4.0, n)
            q = project_simplex(gen.standard_normal(n))
            gamma = float(gen.uniform(0.2, 6.0))
            ours = solve_prior_problem(d, q, gamma, k)
            oracle = prior_problem_bruteforce(d, q, gamma, k)
            np.testing.assert_allclose(ours, oracle, atol=1e-8)


class TestRowProbabilities:
    def test_hand_case_with_self(self):
        p = learn_row_probabilities(np.array([0.0, 1.0, 2.0, 9.0]), 2)
        np.testing.assert_allclose(p, [2 / 3, 1 / 3, 0.0, 0.0], atol=1e-12)

    def test_hand_case_without_self(self):
        p = learn_row_probabilities(np.array([1.0, 2.0, 4.0]), 2)
        np.testing.assert_allclose(p, [0.6, 0.4, 0.0], atol=1e-12)

    def test_tie_fallback_uniform(self):
        p = learn_row_probabilities(np.array([1.0, 1.0, 1.0, 5.0]), 2)
        np.testing.assert_allclose(p, [0.5, 0.5, 0.0, 0.0], atol=1e-15)

    def test_dual_value_hand_case(self):
        assert sparsity_dual_value(np.array([1.0, 2.0, 4.0]), 2) == pytest.approx(5.0)

    def test_dual_value_degenerate_zero(self):
        assert sparsity_dual_value(np.array([2.0, 2.0, 2.0, 7.0]), 2) == 0.0

    def test_cross_solver_consistency(self):
        # closed form == general solver at the boundary regularizer value
        gen = SeededRng(24).stream("rows")
        for _ in range(200):
            n = int(gen.integers(3, 33))
            k = int(gen.integers(1, min(8, n - 1) + 1))
            d = np.concatenate([[0.0], gen.uniform(0.05, 5.0, n - 1)])
            gen.shuffle(d)
            gamma = sparsity_dual_value(d, k)
            if gamma <= 1e-12:
                continue
            ours = learn_row_probabilities(d, k)
            general = solve_prior_problem(d, np.full(n, 1.0 / n), gamma, k)
            np.testing.assert_allclose(ours, general, atol=1e-8)

    def test_homogeneity(self):
        gen = SeededRng(25).stream("rows")
        for _ in range(2000):
            n = int(gen.integers(3, 24))
            k = int(gen.integers(1, n))
            d = gen.uniform(0.0, 3.0, n)
            p = learn_row_probabilities(d, k)
            order = np.argsort(d, kind="stable")
            sorted_p = p[order]
            assert np.all(np.diff(sorted_p) <= 1e-12)

    def test_support_exactly_k_when_gap_strict(self):
        gen = SeededRng(26).stream("rows")
        for _ in range(300):
            n = int(gen.integers(4, 30))
            k = int(gen.integers(1, n - 1))
            d = np.sort(gen.uniform(0, 10, n))
            if d[k] - d[k - 1] <= 1e-9:
                continue
            p = learn_row_probabilities(d, k)
            assert int(np.sum(p > 0)) == k

    def test_row_sums_to_one(self):
        gen = SeededRng(27).stream("rows")
        for _ in range(200):
            n = int(gen.integers(3, 40))
            k = int(gen.integers(1, n))
            d = gen.uniform(0, 5, n)
            assert learn_row_probabilities(d, k).sum() == pytest.approx(1.0, abs=1e-9)


class TestBuildRowGraph:
    def test_matches_per_row_function(self):
        gen = SeededRng(28).stream("bg")
        z = gen.standard_normal((25, 3))
        dist = pairwise_dist(z)
        p = build_row_graph(dist, 5)
        dense = p.mat.toarray()
        for i in range(25):
            np.testing.assert_allclose(
                dense[i], learn_row_probabilities(dist[i], 5), atol=1e-12
            )

    def test_row_sums(self):
        gen = SeededRng(29).stream("bg")
        z = gen.standard_normal((40, 4))
        p = build_row_graph(pairwise_dist(z), 7)
        np.testing.assert_allclose(
            np.asarray(p.mat.sum(axis=1)).ravel(), 1.0, atol=1e-9
        )

    def test_self_loop_weight_positive(self):
        gen = SeededRng(30).stream("bg")
        z = gen.standard_normal((15, 2))
        p = build_row_graph(pairwise_dist(z), 4)
        diag = p.mat.diagonal()
        assert np.all(diag > 0)


class TestSymmetrizeNormalize:
    def test_arithmetic_mean_of_directed_weights(self):
        mat = sparse.csr_array(
            np.array([[0.6, 0.4], [0.2, 0.8]])
        )
        sym = symmetrize_normalize(SparseRowGraph(mat=mat, k=1))
        np.testing.assert_allclose(sym.adjacency.toarray()[0, 1], 0.3)

    def test_symmetric_input_is_fixed_point(self):
        a = np.array([[0.5, 0.5], [0.5, 0.5]])
        sym = symmetrize_normalize(SparseRowGraph(mat=sparse.csr_array(a), k=1))
        np.testing.assert_allclose(sym.adjacency.toarray(), a, atol=1e-15)
        np.testing.assert_allclose(sym.degrees, [1.0, 1.0])
        np.testing.assert_allclose(sym.normalized.toarray(), a, atol=1e-15)

    def test_rcc_edges_exclude_self_loops(self):
        gen = SeededRng(31).stream("sym")
        z = gen.standard_normal((20, 3))
        sym = symmetrize_normalize(build_row_graph(pairwise_dist(z), 4))
        assert np.all(sym.rcc_edges_i < sym.rcc_edges_j)

    def test_sqrt_degree_vector_is_fixed(self):
        gen = SeededRng(32).stream("sym")
        z = gen.standard_normal((30, 4))
        sym = symmetrize_normalize(build_row_graph(pairwise_dist(z), 6))
        v = np.sqrt(sym.degrees)
        np.testing.assert_allclose(sym.normalized @ v, v, atol=1e-9)

    def test_dominant_eigenvalue_at_most_one(self):
        gen = SeededRng(33).stream("sym")
        z = gen.standard_normal((25, 2))
        sym = symmetrize_normalize(build_row_graph(pairwise_dist(z), 5))
        eigs = np.linalg.eigvalsh(sym.normalized.toarray())
        assert eigs.max() <= 1.0 + 1e-9

    def test_isolated_node_rejected(self):
        mat = sparse.csr_array(np.array([[1.0, 0.0], [0.0, 0.0]]))
        with pytest.raises(IsolatedNode):
            symmetrize_normalize(SparseRowGraph(mat=mat, k=1))


class TestSparsitySchedule:
    def test_linear_increment(self):
        sched = SparsitySchedule.start(5, 8, 7, 100)
        assert advance_sparsity(sched).k == 13

    def test_cap_at_n_minus_one(self):
        sched = SparsitySchedule.start(8, 10, 3, 10)
        assert advance_sparsity(sched).k == 9

    def test_zero_increment(self):
        sched = SparsitySchedule.start(4, 0, 3, 10)
        assert advance_sparsity(sched).k == 4

    def test_k0_must_be_at_least_two(self):
        with pytest.raises(ValueError):
            SparsitySchedule.start(1, 1, 3, 10)
