import math
from collections import Counter

import numpy as np
import pytest

from dpsearch.errors import InputError
from dpsearch.mcmc import (ChainState, check_record, gibbs_sweep, initial_assignment,
                           propose_split_merge, protocol_inits, run_chain, run_protocol,
                           split_merge_step)
from dpsearch.models import DcmModel, GaussianModel
from dpsearch.oracle import enumerate_posterior, log_joint
from dpsearch.prior import log_crp_partition


@pytest.fixture
def gauss2():
    return GaussianModel(0.0, 10.0, 1.0, 2)


def small_data(n, seed=1):
    return np.random.default_rng(seed).normal(0, 2, (n, 2))


def empirical_tv(data, model, alpha, step, samples, burn=500, seed=5):
    post = enumerate_posterior(data, model, alpha).as_dict()
    state = ChainState(data, model, alpha, [0] * len(data))
    rng = np.random.default_rng(seed)
    counts = Counter()
    for it in range(samples + burn):
        step(state, rng)
        if it >= burn:
            counts[state.assignment] += 1
    return 0.5 * sum(abs(counts[a] / samples - p) for a, p in post.items())


class TestChainState:
    def test_log_joint_matches_oracle(self, gauss2):
        data = small_data(7)
        z = [0, 1, 0, 2, 2, 1, 0]
        state = ChainState(data, gauss2, 1.3, z)
        assert state.log_joint == pytest.approx(log_joint(z, data, gauss2, 1.3), abs=1e-10)
        assert state.num_clusters == 3

    def test_cluster_stats_track_members(self, gauss2):
        data = small_data(4)
        state = ChainState(data, gauss2, 1.0, [5, 7, 5, 9])
        stats = state.cluster_stats()
        assert [s.datum_ids for s in stats] == [{0, 2}, {1}, {3}]
        np.testing.assert_allclose(stats[0].moment_sum, data[0] + data[2])

    def test_length_mismatch(self, gauss2):
        with pytest.raises(InputError):
            ChainState(small_data(3), gauss2, 1.0, [0, 0])

    def test_gibbs_keeps_incremental_terms_exact(self, gauss2):
        data = small_data(15, 2)
        state = ChainState(data, gauss2, 1.0, [0] * 15)
        rng = np.random.default_rng(0)
        for _ in range(30):
            gibbs_sweep(state, rng)
            split_merge_step(state, rng, 3, gibbs_sweeps=0)
            assert state.log_joint == pytest.approx(
                log_joint(state.assignment, data, gauss2, 1.0), abs=1e-8)
            assert (state.counts >= 0).all()


class TestSplitMerge:
    def test_two_singleton_merge_ratio(self):
        # hand-computed joint of merged vs split partitions of a 2-point dataset
        m = GaussianModel(0.0, 10.0, 1.0, 1)
        data = np.array([[0.3], [1.1]])
        alpha = 0.7
        state = ChainState(data, m, alpha, [0, 1])
        kind, log_ratio, groups = propose_split_merge(state, 0, 1, 5, np.random.default_rng(0))
        merged = log_crp_partition((0, 0), alpha) + m.log_marginal_closed(data)
        split = (log_crp_partition((0, 1), alpha) + m.log_marginal_closed(data[[0]])
                 + m.log_marginal_closed(data[[1]]))
        assert kind == "merge" and groups == ([0, 1],)
        assert log_ratio == pytest.approx(merged - split, abs=1e-12)

    def test_split_of_pair_is_inverse(self):
        m = GaussianModel(0.0, 10.0, 1.0, 1)
        data = np.array([[0.3], [1.1]])
        state = ChainState(data, m, 0.7, [0, 0])
        kind, log_ratio, _ = propose_split_merge(state, 0, 1, 5, np.random.default_rng(0))
        merge_state = ChainState(data, m, 0.7, [0, 1])
        _, merge_ratio, _ = propose_split_merge(merge_state, 0, 1, 5, np.random.default_rng(0))
        assert kind == "split"
        assert log_ratio == pytest.approx(-merge_ratio, abs=1e-12)

    def test_same_anchor_rejected(self, gauss2):
        state = ChainState(small_data(3), gauss2, 1.0, [0, 0, 0])
        with pytest.raises(InputError):
            propose_split_merge(state, 1, 1, 5, np.random.default_rng(0))

    def test_needs_two_points(self, gauss2):
        state = ChainState(small_data(1), gauss2, 1.0, [0])
        with pytest.raises(InputError):
            split_merge_step(state, np.random.default_rng(0))


class TestStationarity:
    def test_gibbs_n4(self, gauss2):
        assert empirical_tv(small_data(4), gauss2, 1.0, gibbs_sweep, 20000) <= 0.05

    def test_split_merge_only_n4(self, gauss2):
        step = lambda s, r: split_merge_step(s, r, 5, gibbs_sweeps=0)
        assert empirical_tv(small_data(4), gauss2, 1.0, step, 20000) <= 0.05

    def test_gibbs_dcm_n3(self):
        m = DcmModel(1.0, 3)
        data = np.array([[3, 0, 1], [0, 2, 2], [2, 1, 0]], float)
        assert empirical_tv(data, m, 0.5, gibbs_sweep, 20000) <= 0.05


class TestRuns:
    def test_single_point(self, gauss2):
        for sampler in ("gibbs", "splitmerge"):
            rec = run_chain(small_data(1), gauss2, 1.0, sampler, 5, "single")
            assert rec.best_assignment == (0,)

    def test_deterministic(self, gauss2):
        data = small_data(12, 3)
        a = run_chain(data, gauss2, 1.0, "splitmerge", 40, "random", seed=3, run_index=2)
        b = run_chain(data, gauss2, 1.0, "splitmerge", 40, "random", seed=3, run_index=2)
        assert a.trace == b.trace and a.best_assignment == b.best_assignment

    def test_best_is_max_of_trace(self, gauss2):
        data = small_data(10, 4)
        rec = run_chain(data, gauss2, 1.0, "gibbs", 50, "separate")
        assert rec.best_log_joint == max(rec.trace)
        assert rec.trace[rec.iteration_of_best - 1] == rec.best_log_joint
        check_record(rec, data, gauss2, 1.0)

    def test_protocol_inits(self):
        assert protocol_inits(15) == ["single"] * 5 + ["separate"] * 5 + ["random"] * 5

    def test_random_init_cluster_count(self):
        labels = initial_assignment("random", 50, np.random.default_rng(0))
        assert max(labels) < math.ceil(math.log2(50))
        with pytest.raises(InputError):
            initial_assignment("kmeans", 5, np.random.default_rng(0))

    def test_protocol_parallel_matches_serial(self, gauss2):
        data = small_data(8, 5)
        best1, recs1 = run_protocol(data, gauss2, 1.0, "gibbs", 20, seed=1, runs=6)
        best2, recs2 = run_protocol(data, gauss2, 1.0, "gibbs", 20, seed=1, runs=6, workers=2)
        assert [r.trace for r in recs1] == [r.trace for r in recs2]
        assert best1.best_log_joint == max(r.best_log_joint for r in recs1)

    @pytest.mark.parametrize("kw", [dict(sampler="hmc"), dict(iters=0)])
    def test_bad_arguments(self, gauss2, kw):
        args = dict(sampler="gibbs", iters=5)
        args.update(kw)
        with pytest.raises(InputError):
            run_chain(small_data(3), gauss2, 1.0, init="single", **args)
