import itertools

import networkx as nx
import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st

from coupdoob import (
    ChainError,
    Dist,
    FiniteChain,
    check_equivalence,
    check_nonsingular,
    convergence_curve,
    invariant_measures,
    n_step,
    random_chain,
    structure,
    total_variation,
)
from coupdoob.chain import support_sequences

from conftest import reach_matrix


def paths_law(chain, x, n):
    """Brute-force path enumeration of P_n(x, .)."""
    k = chain.size
    out = np.zeros(k)
    i0 = chain.index(x)
    for path in itertools.product(range(k), repeat=n):
        w, cur = 1.0, i0
        for nxt in path:
            w *= chain.matrix[cur, nxt]
            cur = nxt
        out[cur] += w
    return out


class TestValidation:
    def test_row_sum_rejected(self):
        with pytest.raises(ChainError, match="sums to"):
            FiniteChain.from_matrix([[0.5, 0.4], [0.0, 1.0]])

    def test_negative_rejected(self):
        with pytest.raises(ChainError, match="negative"):
            FiniteChain.from_matrix([[1.5, -0.5], [0.0, 1.0]])

    def test_unknown_target(self):
        with pytest.raises(ChainError, match="unknown state"):
            FiniteChain.from_rows(["a"], {"a": {"b": 1.0}})

    def test_rows_view_is_sparse(self, chain_a):
        assert FiniteChain.from_rows(["x", "y"], {"x": {"y": 1}, "y": {"x": 1}}).rows == {
            "x": {"y": 1.0}, "y": {"x": 1.0}}
        assert chain_a.rows[0] == {0: 0.5, 1: 0.5}

    def test_matrix_is_read_only(self, chain_a):
        with pytest.raises(ValueError):
            chain_a.matrix[0, 0] = 1.0

    def test_dist_validation(self):
        with pytest.raises(ChainError):
            Dist((0, 1), [0.5, 0.6])
        with pytest.raises(ChainError):
            Dist((0, 1), [1.5, -0.5])


class TestNStep:
    def test_zero_steps_is_point_mass(self, chain_a):
        assert np.array_equal(n_step(chain_a, 1, 0).weights, [0.0, 1.0])

    def test_two_steps_chain_a(self, chain_a):
        np.testing.assert_allclose(n_step(chain_a, 0, 2).weights, [0.35, 0.65], atol=1e-15)
        np.testing.assert_allclose(paths_law(chain_a, 0, 2), [0.35, 0.65], atol=1e-15)

    def test_swap_three_steps(self, swap):
        assert np.array_equal(n_step(swap, 0, 3).weights, [0.0, 1.0])

    def test_unknown_state(self, chain_a):
        with pytest.raises(ChainError):
            n_step(chain_a, "nope", 1)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_path_enumeration(self, seed):
        chain = random_chain(4, 0.75, seed)
        for n in range(4):
            np.testing.assert_allclose(n_step(chain, 2, n).weights, paths_law(chain, 2, n),
                                       atol=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(size=st.integers(2, 8), seed=st.integers(0, 10**6),
           m=st.integers(0, 10), n=st.integers(0, 10))
    def test_chapman_kolmogorov(self, size, seed, m, n):
        chain = random_chain(size, 0.6, seed)
        x = chain.states[seed % size]
        direct = n_step(chain, x, m + n).weights
        via = n_step(chain, n_step(chain, x, m), n).weights
        assert np.abs(direct - via).max() < 1e-12


class TestTotalVariation:
    def test_examples(self):
        s = (0, 1)
        d = Dist(s, [0.3, 0.7])
        assert total_variation(d, d) == 0.0
        assert total_variation(Dist.point(s, 0), Dist.point(s, 1)) == 2.0
        assert total_variation(Dist(s, [0.5, 0.5]), Dist(s, [0.2, 0.8])) == pytest.approx(
            0.6, abs=1e-15)

    def test_mismatched_states(self):
        with pytest.raises(ChainError):
            total_variation(Dist.point((0, 1), 0), Dist.point((0, 2), 0))

    @given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
           st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3),
           st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
    def test_metric_properties(self, a, b, c):
        s = (0, 1, 2)
        d1, d2, d3 = (Dist(s, np.array(v) / sum(v)) for v in (a, b, c))
        t12 = total_variation(d1, d2)
        assert t12 == total_variation(d2, d1)
        assert 0.0 <= t12 <= 2.0
        assert t12 <= total_variation(d1, d3) + total_variation(d3, d2) + 1e-15
        assert t12 == pytest.approx(2 * (1 - np.minimum(d1.weights, d2.weights).sum()),
                                    abs=1e-14)


class TestInvariantMeasures:
    def test_chain_a(self, chain_a):
        (mu,) = invariant_measures(chain_a)
        np.testing.assert_allclose(mu.weights, [2 / 7, 5 / 7], atol=1e-15)

    def test_identity(self, identity2):
        mus = invariant_measures(identity2)
        assert [m.as_dict() for m in mus] == [{0: 1.0}, {1: 1.0}]

    def test_swap(self, swap):
        (mu,) = invariant_measures(swap)
        assert np.array_equal(mu.weights, [0.5, 0.5])

    @pytest.mark.parametrize("seed", range(30))
    def test_residual_and_count_against_null_space(self, seed):
        chain = random_chain(3 + seed % 6, 0.4, seed)
        mus = invariant_measures(chain)
        st_ = structure(chain)
        assert len(mus) == sum(st_.recurrent)
        for mu in mus:
            assert np.abs(mu.weights @ chain.matrix - mu.weights).max() < 1e-12
        # independent route: dimension of the left fixed-point space
        null = scipy.linalg.null_space((chain.matrix - np.eye(chain.size)).T)
        assert null.shape[1] == len(mus)


class TestStructure:
    def test_identity(self, identity2):
        st_ = structure(identity2)
        assert st_.classes == ((0,), (1,))
        assert st_.recurrent == (True, True)

    def test_chain_a(self, chain_a):
        st_ = structure(chain_a)
        assert st_.classes == ((0, 1),) and st_.periods == (1,)

    def test_swap_period(self, swap):
        assert structure(swap).periods == (2,)

    def test_transient(self, absorbing3):
        st_ = structure(absorbing3)
        assert st_.transient_states == [1]
        assert st_.recurrent_classes == [(0,), (2,)]

    @pytest.mark.parametrize("seed", range(20))
    def test_against_networkx(self, seed):
        chain = random_chain(3 + seed % 6, 0.35, seed)
        G = nx.DiGraph()
        G.add_nodes_from(range(chain.size))
        G.add_edges_from(zip(*np.nonzero(chain.matrix > 0)))
        expected = sorted(tuple(sorted(c)) for c in nx.strongly_connected_components(G))
        st_ = structure(chain)
        assert sorted(st_.classes) == expected
        cond = nx.condensation(G)
        for cls, rec, per in zip(st_.classes, st_.recurrent, st_.periods):
            node = cond.graph["mapping"][cls[0]]
            assert rec == (cond.out_degree(node) == 0)
            if rec:
                assert per == _nx_period(G, cls)


def _nx_period(G, cls):
    sub = G.subgraph(cls)
    return 1 if nx.is_aperiodic(sub) else _brute_period(sub)


def _brute_period(sub):
    nodes = list(sub)
    A = nx.to_numpy_array(sub, nodelist=nodes) > 0
    lengths = []
    M = A.copy()
    for n in range(1, 2 * len(nodes) ** 2 + 2):
        if M[0, 0]:
            lengths.append(n)
        M = (M.astype(int) @ A.astype(int)) > 0
    return int(np.gcd.reduce(lengths))


class TestSupports:
    def test_equivalence_examples(self, chain_a, swap):
        assert check_equivalence(chain_a, 0, 1, 5) == 1
        assert check_equivalence(swap, 0, 1, 100) is None
        assert check_equivalence(swap, 1, 1, 100) == 1

    def test_nonsingular_examples(self, chain_a, identity2):
        assert check_nonsingular(chain_a, 0, 1, 5) == 1
        assert check_nonsingular(identity2, 0, 1, 1000) is None

    def test_truncated_counterexample(self):
        from coupdoob import build
        chain, _ = build("doob-counterexample").truncate(11)
        # oracle: first n where integer path-count supports meet
        oracle = next(n for n in range(1, 50)
                      if (reach_matrix(chain, n)[1] & reach_matrix(chain, n)[2]).any())
        assert oracle == 2
        assert check_nonsingular(chain, 1, 2, 20) == 2

    @pytest.mark.parametrize("seed", range(20))
    def test_against_path_count_oracle(self, seed):
        chain = random_chain(3 + seed % 5, 0.3, seed)
        n_max = 12
        R = [None] + [reach_matrix(chain, n) for n in range(1, n_max + 1)]
        for x, y in itertools.product(range(chain.size), repeat=2):
            eq = next((n for n in range(1, n_max + 1) if (R[n][x] == R[n][y]).all()), None)
            ns = next((n for n in range(1, n_max + 1) if (R[n][x] & R[n][y]).any()), None)
            assert check_equivalence(chain, x, y, n_max) == eq
            assert check_nonsingular(chain, x, y, n_max) == ns
            if eq is not None:
                assert ns is not None and ns <= eq

    def test_support_sequence_stops_when_periodic(self, swap):
        assert [n for n, _ in support_sequences(swap, 100)] == [1, 2]


class TestConvergenceCurve:
    def test_chain_a_start(self, chain_a):
        (mu,) = invariant_measures(chain_a)
        curve = convergence_curve(chain_a, 0, mu, 30)
        assert curve[0] == pytest.approx(10 / 7, abs=1e-15)
        # two-state chain contracts by 1 - a - b = 0.3 per step
        np.testing.assert_allclose(curve, (10 / 7) * 0.3 ** np.arange(31), rtol=1e-12,
                                   atol=1e-14)

    def test_swap_constant(self, swap):
        (mu,) = invariant_measures(swap)
        assert np.array_equal(convergence_curve(swap, 0, mu, 25), np.ones(26))

    def test_start_at_mu(self, chain_a):
        (mu,) = invariant_measures(chain_a)
        assert np.abs(convergence_curve(chain_a, mu, mu, 20)).max() < 1e-15

    def test_non_invariant_rejected(self, chain_a):
        with pytest.raises(ChainError, match="not invariant"):
            convergence_curve(chain_a, 0, Dist((0, 1), [0.5, 0.5]), 3)

    @pytest.mark.parametrize("seed", range(10))
    def test_non_increasing(self, seed):
        chain = random_chain(2 + seed % 7, 0.5, seed)
        for mu in invariant_measures(chain):
            for x in chain.states:
                assert np.all(np.diff(convergence_curve(chain, x, mu, 40)) <= 1e-12)
