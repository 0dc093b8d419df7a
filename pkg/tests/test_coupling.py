import threading

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coupdoob import (
    AssumptionsFail,
    FiniteChain,
    JointDist,
    build,
    doeblin_set,
    hybrid_kernel,
    independent_kernel,
    invariant_measures,
    maximal_coupling_row,
    maximal_kernel,
    random_chain,
    select_doeblin,
    split,
    total_variation,
)

DISJOINT = FiniteChain.from_matrix([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


class TestSplit:
    def test_identical_rows(self, chain_a):
        parts = split(chain_a, 1, 1)
        assert parts.overlap_mass == 1.0
        np.testing.assert_allclose(parts.common_part.weights, [0.2, 0.8], atol=1e-15)

    def test_chain_a(self, chain_a):
        parts = split(chain_a, 0, 1)
        assert parts.overlap_mass == pytest.approx(0.7, abs=1e-15)
        np.testing.assert_allclose(parts.common_part.weights, [2 / 7, 5 / 7], atol=1e-15)
        assert parts.residual_1.as_dict() == {0: 1.0}
        assert parts.residual_2.as_dict() == {1: 1.0}

    def test_singular_rows(self):
        assert split(DISJOINT, 0, 1).overlap_mass == 0.0

    @settings(max_examples=60, deadline=None)
    @given(size=st.integers(2, 8), seed=st.integers(0, 10**6), sp=st.floats(0.2, 1.0))
    def test_invariants(self, size, seed, sp):
        chain = random_chain(size, sp, seed)
        x1, x2 = seed % size, (seed // 7) % size
        parts = split(chain, x1, x2)
        tv = total_variation(chain.row(x1), chain.row(x2))
        assert parts.overlap_mass == pytest.approx(1 - tv / 2, abs=1e-14)
        p = parts.overlap_mass
        for x, res in ((x1, parts.residual_1), (x2, parts.residual_2)):
            rebuilt = p * parts.common_part.weights + (1 - p) * res.weights
            assert np.abs(rebuilt - chain.matrix[x]).max() < 1e-14
        if p < 1:
            assert not (parts.residual_1.support & parts.residual_2.support)


class TestMaximalRow:
    def test_chain_a(self, chain_a):
        row = maximal_coupling_row(chain_a, 0, 1).as_dict()
        assert row.keys() == {(0, 0), (1, 1), (0, 1)}
        assert row[(0, 0)] == pytest.approx(0.2, abs=1e-15)
        assert row[(1, 1)] == pytest.approx(0.5, abs=1e-15)
        assert row[(0, 1)] == pytest.approx(0.3, abs=1e-15)

    def test_same_state_is_diagonal(self, chain_a):
        W = maximal_coupling_row(chain_a, 1, 1).weights
        np.testing.assert_allclose(np.diag(W), [0.2, 0.8], atol=1e-15)
        assert W[0, 1] == W[1, 0] == 0.0

    def test_point_masses(self):
        assert maximal_coupling_row(DISJOINT, 0, 1).as_dict() == {(0, 1): 1.0}

    def test_kernel_rows_agree_with_direct_rows(self):
        chain = random_chain(5, 0.6, 3)
        S = maximal_kernel(chain)
        for x in chain.states:
            for y in chain.states:
                np.testing.assert_allclose(S.row(x, y).weights,
                                           maximal_coupling_row(chain, x, y).weights,
                                           atol=1e-15)

    def test_any_coupling_has_no_more_diagonal_mass(self):
        """Random marginal-preserving perturbations never beat 1 - TV/2."""
        rng = np.random.default_rng(11)
        checked = 0
        while checked < 1000:
            chain = random_chain(int(rng.integers(2, 7)), 1.0, int(rng.integers(10**6)))
            n = chain.size
            x1, x2 = rng.integers(n, size=2)
            W = np.array(maximal_coupling_row(chain, x1, x2).weights)
            bound = 1 - total_variation(chain.row(x1), chain.row(x2)) / 2
            for _ in range(int(rng.integers(1, 6))):
                i, k = rng.choice(n, 2, replace=False)
                j, l = rng.choice(n, 2, replace=False)
                t = rng.uniform(0, min(W[i, j], W[k, l]))
                W[i, j] -= t
                W[k, l] -= t
                W[i, l] += t
                W[k, j] += t
            np.testing.assert_allclose(W.sum(axis=1), chain.matrix[x1], atol=1e-12)
            np.testing.assert_allclose(W.sum(axis=0), chain.matrix[x2], atol=1e-12)
            assert np.trace(W) <= bound + 1e-12
            checked += 1


class TestIndependent:
    def test_chain_a(self, chain_a):
        row = independent_kernel(chain_a).row(0, 1).as_dict()
        expected = {(0, 0): 0.1, (0, 1): 0.4, (1, 0): 0.1, (1, 1): 0.4}
        assert row.keys() == expected.keys()
        for k, v in expected.items():
            assert row[k] == pytest.approx(v, abs=1e-15)

    def test_diagonal_mass(self, chain_a):
        row = independent_kernel(chain_a).row(1, 1)
        assert row.diagonal_mass == pytest.approx(0.2**2 + 0.8**2, abs=1e-15)

    def test_swap(self, swap):
        assert independent_kernel(swap).row(0, 1).as_dict() == {(1, 0): 1.0}


class TestDoeblin:
    def test_boundary_case_includes_everything(self, chain_a):
        C = doeblin_set(chain_a, 1, 0.7)
        assert C.members == {(0, 0), (0, 1), (1, 0), (1, 1)}
        assert C.mass == pytest.approx(1.0)

    def test_strict_case_diagonal_only(self, chain_a):
        assert doeblin_set(chain_a, 1, 0.8).members == {(0, 0), (1, 1)}

    @pytest.mark.parametrize("seed", range(10))
    def test_diagonal_always_member(self, seed):
        chain = random_chain(2 + seed % 6, 0.3, seed)
        C = doeblin_set(chain, 1 + seed % 3, 0.99)
        assert all((x, x) in C for x in chain.states)

    def test_invalid_parameters(self, chain_a):
        with pytest.raises(ValueError):
            doeblin_set(chain_a, 0, 0.5)
        with pytest.raises(ValueError):
            doeblin_set(chain_a, 1, 1.0)

    def test_select_chain_a(self, chain_a):
        (mu,) = invariant_measures(chain_a)
        C = select_doeblin(chain_a, mu, 3)
        assert (C.N, C.p) == (1, pytest.approx(0.7, abs=1e-15))
        assert C.mass == pytest.approx(1.0)

    def test_select_fails(self, identity2, swap):
        with pytest.raises(AssumptionsFail):
            select_doeblin(identity2, invariant_measures(identity2)[0], 10)
        with pytest.raises(AssumptionsFail):
            select_doeblin(swap, invariant_measures(swap)[0], 10)

    def test_select_uses_larger_n_when_it_pays(self):
        # one-step overlap 0, two-step overlap positive
        chain = FiniteChain.from_matrix([[0, 1, 0], [0, 0, 1], [0.5, 0.5, 0]])
        mu = invariant_measures(chain)[0]
        C = select_doeblin(chain, mu, 4)
        assert C.N >= 2 and 0 < C.p < 1


class TestHybrid:
    def test_all_maximal_when_c_is_everything(self, chain_a):
        S = hybrid_kernel(chain_a, doeblin_set(chain_a, 1, 0.7))
        M = maximal_kernel(chain_a)
        for x in (0, 1):
            for y in (0, 1):
                np.testing.assert_array_equal(S.row(x, y).weights, M.row(x, y).weights)

    def test_off_c_rows_are_independent(self, chain_a):
        S = hybrid_kernel(chain_a, doeblin_set(chain_a, 1, 0.8))
        R = independent_kernel(chain_a)
        np.testing.assert_array_equal(S.row(0, 1).weights, R.row(0, 1).weights)
        assert S.row(0, 0).diagonal_mass == pytest.approx(1.0, abs=1e-15)

    def test_n_step_rows(self, chain_a):
        C = doeblin_set(chain_a, 2, 0.9)
        S = hybrid_kernel(chain_a, C)
        assert S.step == 2
        P2 = chain_a.power(2).matrix
        W = S.row(1, 1).weights
        np.testing.assert_allclose(np.diag(W), P2[1], atol=1e-15)
        assert W.trace() == pytest.approx(1.0, abs=1e-15)

    def test_row_cache_under_threads(self):
        chain = random_chain(6, 0.7, 5)
        S = maximal_kernel(chain)
        results = []

        def work():
            results.append([S.row(x, y) for x in chain.states for y in chain.states])

        threads = [threading.Thread(target=work) for _ in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        for got in results:
            for a, b in zip(got, results[0]):
                np.testing.assert_array_equal(a.weights, b.weights)


def test_joint_dist_validation():
    with pytest.raises(ValueError):
        JointDist((0, 1), [[0.5, 0.5], [0.5, 0.0]])
