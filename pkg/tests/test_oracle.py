import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpsearch.errors import InputError
from dpsearch.models import DcmModel, GaussianModel
from dpsearch.oracle import (bell_number, enumerate_posterior, exhaustive_map, log_joint,
                             nll_ratio, pairwise_fscore, precision_recall,
                             restricted_growth_strings)

ZERO_PAIR_MARGINAL = -3.3601382852710566  # quadrature, see test_models
PRIOR_PREDICTIVE_AT_ZERO = -0.5 * math.log(2 * math.pi * 11.0)


@pytest.fixture
def gauss1():
    return GaussianModel(0.0, 10.0, 1.0, 1)


class TestEnumeration:
    @pytest.mark.parametrize("n,bell", [(0, 1), (1, 1), (2, 2), (3, 5), (4, 15), (5, 52),
                                        (6, 203), (10, 115975)])
    def test_bell_numbers(self, n, bell):
        assert bell_number(n) == bell

    @pytest.mark.parametrize("n", range(0, 8))
    def test_rgs_count_and_uniqueness(self, n):
        strings = list(restricted_growth_strings(n))
        assert len(strings) == bell_number(n) == len(set(strings))
        assert strings == sorted(strings)

    def test_rgs_are_all_partitions(self):
        # compare against a brute-force relabelling of all n^n label vectors
        n = 5
        seen = set()
        for labels in itertools.product(range(n), repeat=n):
            first = {}
            seen.add(tuple(first.setdefault(l, len(first)) for l in labels))
        assert seen == set(restricted_growth_strings(n))


class TestLogJoint:
    def test_pair_together(self, gauss1):
        # prior of {one cluster of 2} at alpha=1 is 1/2
        expected = math.log(0.5) + ZERO_PAIR_MARGINAL
        assert log_joint((0, 0), [[0.0], [0.0]], gauss1, 1.0) == pytest.approx(expected, abs=1e-9)
        assert expected == pytest.approx(-4.0532854658, abs=1e-9)

    def test_pair_apart(self, gauss1):
        expected = math.log(0.5) + 2 * PRIOR_PREDICTIVE_AT_ZERO
        assert log_joint((0, 1), [[0.0], [0.0]], gauss1, 1.0) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-4.9289195198, abs=1e-9)

    def test_labels_are_arbitrary(self, gauss1):
        data = [[0.1], [2.0], [0.3]]
        assert log_joint(("x", "y", "x"), data, gauss1, 1.0) == pytest.approx(
            log_joint((0, 1, 0), data, gauss1, 1.0))

    def test_length_mismatch(self, gauss1):
        with pytest.raises(InputError):
            log_joint((0, 1), [[0.0]], gauss1, 1.0)


class TestExhaustiveMap:
    def test_far_apart_points_split(self, gauss1):
        c = exhaustive_map([[-100.0], [100.0]], gauss1, 1.0)
        assert c.assignment == (0, 1)

    def test_identical_points_merge(self, gauss1):
        c = exhaustive_map([[0.0], [0.0]], gauss1, 1.0)
        assert c.assignment == (0, 0)
        assert c.log_joint == pytest.approx(math.log(0.5) + ZERO_PAIR_MARGINAL, abs=1e-9)

    def test_is_maximum(self):
        rng = np.random.default_rng(0)
        m = GaussianModel(0.0, 10.0, 1.0, 2)
        data = rng.normal(scale=3, size=(6, 2))
        best = exhaustive_map(data, m, 1.0)
        scores = [log_joint(c, data, m, 1.0) for c in restricted_growth_strings(6)]
        assert best.log_joint == pytest.approx(max(scores), abs=1e-10)

    def test_dcm(self):
        m = DcmModel(1.0, 3)
        data = np.array([[5, 0, 0], [4, 1, 0], [0, 0, 6], [0, 1, 5]], float)
        assert exhaustive_map(data, m, 1.0).assignment == (0, 0, 1, 1)

    def test_refuses_large_inputs(self, gauss1):
        with pytest.raises(InputError, match="partition"):
            exhaustive_map(np.zeros((13, 1)), gauss1, 1.0)
        with pytest.raises(InputError):
            exhaustive_map(np.zeros((0, 1)), gauss1, 1.0)


class TestPosterior:
    def test_sums_to_one_and_matches_direct(self, gauss1):
        data = np.array([[0.0], [0.5], [4.0]])
        post = enumerate_posterior(data, gauss1, 1.5)
        assert len(post) == 5
        assert sum(post.probs) == pytest.approx(1.0, abs=1e-12)
        # direct: CRP prior times closed-form marginals, normalised
        weights = {}
        for c in restricted_growth_strings(3):
            sizes = [c.count(k) for k in set(c)]
            prior = 1.5 ** len(sizes) * math.prod(math.factorial(s - 1) for s in sizes) / (
                1.5 * 2.5 * 3.5)
            lik = sum(gauss1.log_marginal_closed(data[[i for i in range(3) if c[i] == k]])
                      for k in set(c))
            weights[c] = prior * math.exp(lik)
        z = sum(weights.values())
        for c, p in post.as_dict().items():
            assert p == pytest.approx(weights[c] / z, rel=1e-10)


class TestFscore:
    def test_all_in_one_vs_split(self):
        assert pairwise_fscore((0, 0, 0), (0, 0, 1)) == pytest.approx(math.sqrt(1 / 3))
        assert round(pairwise_fscore((0, 0, 0), (0, 0, 1)), 4) == 0.5774

    def test_harmonic_variant(self):
        p, r = precision_recall((0, 0, 0), (0, 0, 1))
        assert (p, r) == (pytest.approx(1 / 3), 1.0)
        assert pairwise_fscore((0, 0, 0), (0, 0, 1), harmonic=True) == pytest.approx(0.5)

    def test_identical_is_one(self):
        assert pairwise_fscore((0, 1, 1, 2), ("a", "b", "b", "c")) == 1.0

    @settings(max_examples=60, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=15))
    def test_bounds_and_symmetry(self, pairs):
        pred, truth = zip(*pairs)
        f = pairwise_fscore(pred, truth)
        assert 0.0 <= f <= 1.0
        assert f == pytest.approx(pairwise_fscore(truth, pred))

    def test_length_mismatch(self):
        with pytest.raises(InputError):
            pairwise_fscore((0, 1), (0,))

    def test_nll_ratio(self):
        assert nll_ratio(-110.0, -100.0) == pytest.approx(1.1)
        assert nll_ratio(-100.0, -100.0) == 1.0
