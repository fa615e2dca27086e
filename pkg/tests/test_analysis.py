import csv
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import split_rhat_loops
from rankclust.analysis import (
    cluster_recovery_rates,
    coclustering_matrix,
    export_traces,
    mae_against_truth,
    modal_partition,
    normalize,
    rhat,
    split_rhat,
    summarize,
    trace_matrix,
    write_summary_json,
)
from rankclust.prior import Partition
from rankclust.sampler import ChainConfig, ChainSamples, PosteriorSamples


def chain(labels, omega=None):
    labels = np.asarray(labels, dtype=np.int16)
    if omega is None:
        omega = labels.astype(float) + 1.0
    return ChainSamples(labels, np.asarray(omega, dtype=float))


def samples(*chains, burn_in=0):
    n = chains[0].omega.shape[0]
    cfg = ChainConfig(t1=n, t2=1, n_chains=len(chains), burn_in=burn_in)
    return PosteriorSamples(list(chains), cfg)


class TestCoclustering:
    def test_single_cluster_everywhere(self):
        m = coclustering_matrix(np.zeros((10, 4), dtype=int))
        np.testing.assert_array_equal(m, np.ones((4, 4)))

    def test_alternating_partitions(self):
        rows = [[0, 0, 1], [0, 1, 1]] * 5
        m = coclustering_matrix(np.array(rows))
        np.testing.assert_allclose(m, [[1, 0.5, 0], [0.5, 1, 0.5], [0, 0.5, 1]])

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.lists(st.integers(0, 3), min_size=5, max_size=5), min_size=1, max_size=30))
    def test_symmetric_with_unit_diagonal(self, rows):
        m = coclustering_matrix(np.array(rows))
        np.testing.assert_array_equal(m, m.T)
        np.testing.assert_array_equal(np.diag(m), 1.0)
        assert ((m >= 0) & (m <= 1)).all()


class TestSummarize:
    def test_default_burn_in_drops_half(self):
        c = chain([[0, 1]] * 10, [[1.0, 3.0]] * 5 + [[1.0, 1.0]] * 5)
        s = summarize(PosteriorSamples([c]))
        assert s.burn_in == 5 and s.n_retained == 5
        np.testing.assert_allclose(s.median, [0.5, 0.5])

    def test_config_burn_in_used(self):
        c = chain([[0, 1]] * 10)
        s = summarize(samples(c, burn_in=3))
        assert s.n_retained == 7

    def test_draws_are_normalized(self):
        rng = np.random.default_rng(0)
        omega = rng.gamma(2.0, size=(20, 4))
        s = summarize(samples(chain(np.tile(np.arange(4), (20, 1)), omega)))
        np.testing.assert_allclose(s.draws.sum(axis=1), 1.0)
        assert (s.lower <= s.median).all() and (s.median <= s.upper).all()

    def test_k_pmf_and_map(self):
        rows = [[0, 0, 1]] * 6 + [[0, 1, 2]] * 3 + [[0, 0, 0]]
        s = summarize(samples(chain(rows)))
        np.testing.assert_allclose(s.k_pmf, [0.1, 0.6, 0.3])
        assert str(s.map_partition) == "1-1-2"
        assert s.map_frequency == pytest.approx(0.6)

    def test_modal_tie_prefers_fewer_clusters(self):
        g, freq = modal_partition(np.array([[0, 1, 2], [0, 0, 1]]))
        assert g == Partition((0, 0, 1)) and freq == 0.5

    def test_map_ranks_tie_cluster_members(self):
        omega = [[1.0, 1.0, 5.0]] * 4
        s = summarize(samples(chain([[0, 0, 1]] * 4, omega)))
        assert s.map_ranks() == {3: 1, 1: 2, 2: 2}
        assert s.median_ranks() == {3: 1, 1: 2, 2: 3}

    def test_rejects_bad_burn_in(self):
        with pytest.raises(ValueError):
            summarize(PosteriorSamples([chain([[0, 1]] * 4)]), burn_in=4)

    def test_chain_order_does_not_change_summary(self):
        rng = np.random.default_rng(3)
        chains = [chain(rng.integers(0, 2, size=(12, 3)) * [0, 1, 1], rng.gamma(3.0, size=(12, 3))) for _ in range(3)]
        a = summarize(samples(*chains)).to_dict()
        b = summarize(samples(*chains[::-1])).to_dict()
        assert a == b


def test_normalize():
    np.testing.assert_allclose(normalize([[1.0, 3.0], [2.0, 2.0]]), [[0.25, 0.75], [0.5, 0.5]])


def test_mae_example():
    c = chain([[0, 1]] * 4, [[0.6, 0.4]] * 4)
    s = summarize(samples(c))
    assert mae_against_truth(s, [1.0, 1.0]) == pytest.approx(0.1, abs=1e-12)


def test_recovery_rates():
    rows = [[0, 0, 1, 1]] * 3 + [[0, 1, 2, 2]]
    s = summarize(samples(chain(rows)))
    rates = cluster_recovery_rates(s, [1.0, 1.0, 4.0, 4.0])
    assert rates.clustered == pytest.approx((0.75 + 1.0) / 2)
    assert rates.distinct == pytest.approx(0.0)
    only_distinct = cluster_recovery_rates(s, [1.0, 2.0, 3.0, 4.0])
    assert only_distinct.clustered is None


def test_trace_export(tmp_path):
    rng = np.random.default_rng(0)
    chains = [chain(np.zeros((10, 3), dtype=int), rng.gamma(2.0, size=(10, 3))) for _ in range(2)]
    path = tmp_path / "traces.csv"
    n = export_traces(samples(*chains), path)
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    assert n == len(rows) == 80
    assert {r["variable"] for r in rows} == {"K", "omega_1", "omega_2", "omega_3"}
    assert float(rows[1]["value"]) == chains[0].omega[0, 0]


def test_summary_json(tmp_path):
    s = summarize(samples(chain([[0, 0, 1]] * 4)))
    path = tmp_path / "summary.json"
    write_summary_json(s, path, {"config": {"seed": 1}})
    payload = json.loads(path.read_text())
    assert payload["config"] == {"seed": 1}
    assert payload["map_partition"]["clusters"] == [[1, 2], [3]]
    assert len(payload["objects"]) == 3


class TestRhat:
    def test_iid_chains_near_one(self):
        x = np.random.default_rng(0).normal(size=(4, 2000))
        assert split_rhat(x) < 1.05

    def test_separated_constants(self):
        x = np.repeat([[0.0], [1.0]], 100, axis=1) + np.random.default_rng(1).normal(scale=0.01, size=(2, 100))
        assert split_rhat(x) > 10

    def test_matches_loop_reference(self):
        x = np.random.default_rng(2).normal(size=(2, 8))
        assert split_rhat(x) == pytest.approx(split_rhat_loops(x.tolist()), abs=1e-10)

    def test_odd_length_matches_reference(self):
        x = np.random.default_rng(3).normal(size=(3, 9))
        assert split_rhat(x) == pytest.approx(split_rhat_loops(x.tolist()), abs=1e-10)

    def test_degenerate(self):
        assert split_rhat(np.ones((2, 10))) == 1.0
        assert split_rhat(np.repeat([[1.0], [2.0]], 10, axis=1)) == float("inf")
        with pytest.raises(ValueError):
            split_rhat(np.ones((1, 10)))

    def test_on_samples(self):
        rng = np.random.default_rng(4)
        chains = [chain(rng.integers(0, 2, size=(50, 2)) * [0, 1], rng.gamma(2.0, size=(50, 2))) for _ in range(3)]
        s = samples(*chains)
        assert trace_matrix(s, "K").shape == (3, 50)
        assert trace_matrix(s, "omega_2", burn_in=10).shape == (3, 40)
        assert np.isfinite(rhat(s, 1))
        with pytest.raises(ValueError):
            trace_matrix(s, 3)
