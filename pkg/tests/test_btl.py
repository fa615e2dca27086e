import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from rankclust.btl import (
    dataset_log_likelihood,
    design_log_likelihood,
    log_likelihood,
    pairwise_prob,
    sample_ranking,
    stage_denominators,
)
from rankclust.data import Dataset, OrdinalObservation, parse_lines

from oracles import pl_prob


def obs(ranked, considered):
    return OrdinalObservation(tuple(ranked), frozenset(considered))


class TestPairwise:
    def test_fourfold_ladder(self):
        assert pairwise_prob(4, 1) == 0.8

    @pytest.mark.parametrize("c", [1e-8, 0.3, 1.0, 7.5, 1e8])
    def test_equal_worths(self, c):
        assert pairwise_prob(c, c) == 0.5

    def test_three_to_one(self):
        assert pairwise_prob(3, 1) == 0.75

    @pytest.mark.parametrize("a, b", [(0, 1), (1, -2)])
    def test_nonpositive(self, a, b):
        with pytest.raises(ValueError):
            pairwise_prob(a, b)


class TestLogLikelihood:
    def test_three_stage_ranking(self):
        # (2/4) * (1/2) * (1/1)
        assert log_likelihood(obs([3, 1, 2], [1, 2, 3]), [1, 1, 2]) == pytest.approx(math.log(0.25), rel=1e-14)

    def test_single_stage_is_pairwise(self):
        assert log_likelihood(obs([1], [1, 2]), [1, 4]) == pytest.approx(math.log(0.2), rel=1e-14)

    def test_full_pair_equals_winner_only(self):
        assert log_likelihood(obs([2, 1], [1, 2]), [1, 3]) == pytest.approx(log_likelihood(obs([2], [1, 2]), [1, 3]))

    def test_rejects_nonpositive_worths(self):
        with pytest.raises(ValueError):
            log_likelihood(obs([1], [1, 2]), [1, 0])

    def test_stage_denominators(self):
        np.testing.assert_allclose(stage_denominators(obs([3, 1, 2], [1, 2, 3]), [1, 1, 2]), [4, 2, 1])

    @settings(max_examples=100, deadline=None)
    @given(
        st.lists(st.floats(1e-3, 1e3), min_size=5, max_size=5),
        st.floats(1e-4, 1e4),
        st.permutations([1, 2, 3, 4, 5]),
        st.integers(1, 5),
    )
    def test_scale_invariance(self, omega, c, perm, depth):
        o = obs(perm[:depth], [1, 2, 3, 4, 5])
        base = log_likelihood(o, omega)
        scaled = log_likelihood(o, np.asarray(omega) * c)
        assert scaled == pytest.approx(base, rel=1e-10, abs=1e-12)

    @pytest.mark.parametrize("J", [2, 3, 4, 5])
    def test_normalization_by_enumeration(self, J):
        omega = np.random.default_rng(J).gamma(2.0, 1.0, size=J)
        total = sum(math.exp(log_likelihood(obs(p, range(1, J + 1)), omega)) for p in itertools.permutations(range(1, J + 1)))
        assert total == pytest.approx(1.0, abs=1e-10)

    def test_top_k_marginals_normalize(self):
        omega = [0.5, 2.0, 1.0, 3.0]
        total = sum(math.exp(log_likelihood(obs(p, [1, 2, 3, 4]), omega)) for p in itertools.permutations([1, 2, 3, 4], 2))
        assert total == pytest.approx(1.0, abs=1e-12)

    def test_matches_loop_oracle(self):
        omega = [0.7, 1.9, 0.2, 4.0, 1.1]
        o = obs([4, 2, 5], [2, 3, 4, 5])
        assert math.exp(log_likelihood(o, omega)) == pytest.approx(pl_prob(o.ranked, o.considered, omega), rel=1e-13)


class TestDatasetLikelihood:
    def test_empty(self):
        assert dataset_log_likelihood(Dataset(3), [1, 2, 3]) == 0.0
        assert design_log_likelihood(Dataset(3), np.array([1.0, 2.0, 3.0])) == 0.0

    def test_two_identical(self):
        d = parse_lines(["3>1|1,2,3", "3>1|1,2,3"])
        one = log_likelihood(d.observations[0], [1, 2, 3])
        assert dataset_log_likelihood(d, [1, 2, 3]) == pytest.approx(2 * one)

    def test_mixed_fixture_is_sum_of_rows(self):
        d = parse_lines(["2|1,2", "1>2|1,2", "4>3|1,3,4", "5>1>3>2>4", "3|3,5"])
        omega = np.array([0.4, 1.3, 2.2, 0.9, 1.7])
        rows = sum(math.log(pl_prob(o.ranked, o.considered, omega)) for o in d.observations)
        assert dataset_log_likelihood(d, omega) == pytest.approx(rows, rel=1e-13)
        assert design_log_likelihood(d, omega) == pytest.approx(rows, rel=1e-13)


class TestSampling:
    def test_degenerate_worths(self):
        rng = np.random.default_rng(0)
        draws = [sample_ranking([1.0, 1e-300], [1, 2], 2, rng).ranked for _ in range(200)]
        assert all(r == (1, 2) for r in draws)

    def test_depth_too_large(self):
        with pytest.raises(ValueError):
            sample_ranking([1, 1], [1, 2], 3, np.random.default_rng(0))

    def test_uniform_first_place(self):
        rng = np.random.default_rng(1)
        J, n = 4, 8000
        firsts = np.bincount([sample_ranking(np.ones(J), range(1, J + 1), 1, rng).ranked[0] for _ in range(n)], minlength=J + 1)[1:]
        sigma = math.sqrt(n * (1 / J) * (1 - 1 / J))
        assert np.all(np.abs(firsts - n / J) < 3 * sigma)

    def test_pairwise_frequency(self):
        rng = np.random.default_rng(2)
        wins = sum(sample_ranking([1.0, 4.0], [1, 2], 1, rng).ranked[0] == 2 for _ in range(100_000))
        assert abs(wins / 100_000 - 0.8) < 0.004

    def test_partial_considered(self):
        o = sample_ranking([1, 2, 3, 4], [2, 4], 1, np.random.default_rng(3))
        assert o.considered == {2, 4} and o.depth == 1

    def test_sampler_agrees_with_likelihood(self):
        rng = np.random.default_rng(4)
        omega = np.array([1.0, 2.5, 0.6])
        perms = list(itertools.permutations([1, 2, 3]))
        n = 100_000
        index = {p: i for i, p in enumerate(perms)}
        counts = np.zeros(len(perms))
        for _ in range(n):
            counts[index[sample_ranking(omega, [1, 2, 3], 3, rng).ranked]] += 1
        expected = n * np.array([math.exp(log_likelihood(obs(p, [1, 2, 3]), omega)) for p in perms])
        chi2 = ((counts - expected) ** 2 / expected).sum()
        assert stats.chi2.sf(chi2, df=len(perms) - 1) > 0.001
