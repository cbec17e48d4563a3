"""Ground truth for small problems: joint scoring, enumeration, and metrics."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterator, List, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import InputError
from .models import ConjugateModel
from .prior import c_to_m, canonicalize, log_crp_partition, log_prob_m

DEFAULT_MAX_N = 12


@dataclass
class Clustering:
    assignment: tuple
    log_joint: float

    @property
    def num_clusters(self) -> int:
        return len(set(self.assignment))


@dataclass
class PartitionPosterior:
    """Every set partition of a small dataset with its score and posterior mass.

    ``log_joints`` holds the MAP objective (count-vector prior plus data).
    ``probs`` is the DP posterior over labelled partitions, i.e. the CRP
    partition prior times the data likelihood, normalised. The samplers target
    ``probs``.
    """

    assignments: List[tuple]
    log_joints: np.ndarray
    probs: np.ndarray

    def __len__(self):
        return len(self.assignments)

    def as_dict(self) -> dict:
        return dict(zip(self.assignments, self.probs))


def restricted_growth_strings(n: int) -> Iterator[tuple]:
    """All canonical labelings of ``n`` items, in lexicographic order."""
    if n == 0:
        yield ()
        return
    labels = [0] * n
    maxes = [0] * n

    def rec(pos):
        if pos == n:
            yield tuple(labels)
            return
        top = maxes[pos - 1]
        for lab in range(top + 2):
            labels[pos] = lab
            maxes[pos] = max(top, lab)
            yield from rec(pos + 1)

    yield from rec(1)


def log_data_given_c(c: Sequence, data, model: ConjugateModel) -> float:
    data = model.check_data(data)
    groups = {}
    for n, lab in enumerate(c):
        groups.setdefault(lab, []).append(n)
    return sum(model.log_marginal_set(data[idx]) for idx in groups.values())


def log_joint(c: Sequence, data, model: ConjugateModel, alpha: float) -> float:
    """MAP objective: count-vector prior of ``c`` plus the cluster marginals."""
    data = model.check_data(data)
    if len(c) != len(data):
        raise InputError(f"assignment has length {len(c)} but data has {len(data)} points")
    if len(c) == 0:
        raise InputError("empty assignment")
    return log_prob_m(c_to_m(c, alpha)) + log_data_given_c(c, data, model)


def _walk_partitions(data, model: ConjugateModel):
    """Yield ``(labels, log p(x | c))`` for every partition, depth first.

    Labels are yielded in lexicographic order; the tuple is shared, copy it to keep.
    """
    n = len(data)
    labels = [0] * n
    stats = []

    def rec(pos, data_term):
        if pos == n:
            yield labels, data_term
            return
        x = data[pos]
        for k in range(len(stats) + 1):
            if k == len(stats):
                stats.append(model.empty_stats())
            lp = model.log_predictive(x, stats[k])
            stats[k].add(x)
            labels[pos] = k
            yield from rec(pos + 1, data_term + lp)
            stats[k].remove(x)
            if stats[k].count == 0:
                stats.pop()

    yield from rec(0, 0.0)


def _check_size(n: int, max_n: int) -> None:
    if n == 0:
        raise InputError("data must be non-empty")
    if n > max_n:
        raise InputError(
            f"exhaustive enumeration refused: {n} points exceeds max_n={max_n} "
            f"(the partition count grows as the Bell numbers)")


def exhaustive_map(data, model: ConjugateModel, alpha: float,
                   max_n: int = DEFAULT_MAX_N) -> Clustering:
    """Exact MAP clustering by enumerating every set partition.

    Ties go to the lexicographically smallest canonical assignment.
    """
    data = model.check_data(data)
    _check_size(len(data), max_n)
    prior_cache = {}
    best_val = -math.inf
    best = None
    for labels, data_term in _walk_partitions(data, model):
        key = tuple(sorted(Counter(labels).values()))
        prior = prior_cache.get(key)
        if prior is None:
            prior = prior_cache[key] = log_prob_m(c_to_m(labels, alpha))
        val = prior + data_term
        if val > best_val:
            best_val, best = val, tuple(labels)
    return Clustering(best, best_val)


def enumerate_posterior(data, model: ConjugateModel, alpha: float,
                        max_n: int = DEFAULT_MAX_N) -> PartitionPosterior:
    data = model.check_data(data)
    _check_size(len(data), max_n)
    assignments, joints, log_post = [], [], []
    for labels, data_term in _walk_partitions(data, model):
        c = tuple(labels)
        assignments.append(c)
        joints.append(log_prob_m(c_to_m(c, alpha)) + data_term)
        log_post.append(log_crp_partition(c, alpha) + data_term)
    log_post = np.array(log_post)
    probs = np.exp(log_post - logsumexp(log_post))
    return PartitionPosterior(assignments, np.array(joints), probs)


def bell_number(n: int) -> int:
    """Bell number via the Bell triangle."""
    row = [1]
    for _ in range(n - 1 if n > 0 else 0):
        nxt = [row[-1]]
        for v in row:
            nxt.append(nxt[-1] + v)
        row = nxt
    return row[-1]


def pair_counts(pred: Sequence, truth: Sequence):
    """(true positives, predicted same-cluster pairs, true same-cluster pairs)."""
    if len(pred) != len(truth):
        raise InputError(f"assignments differ in length: {len(pred)} vs {len(truth)}")

    def pairs(counter):
        return sum(v * (v - 1) // 2 for v in counter.values())

    return (pairs(Counter(zip(pred, truth))), pairs(Counter(pred)), pairs(Counter(truth)))


def precision_recall(pred: Sequence, truth: Sequence):
    tp, pred_pairs, true_pairs = pair_counts(pred, truth)
    precision = tp / pred_pairs if pred_pairs else 1.0
    recall = tp / true_pairs if true_pairs else 1.0
    return precision, recall


def pairwise_fscore(pred: Sequence, truth: Sequence, harmonic: bool = False) -> float:
    """Pairwise same-cluster f-score.

    By default this is the geometric mean of pairwise precision and recall;
    ``harmonic=True`` gives the usual F1. A clustering with no same-cluster
    pairs has vacuous precision 1, and likewise for recall.
    """
    p, r = precision_recall(pred, truth)
    if harmonic:
        return 2 * p * r / (p + r) if p + r else 0.0
    return math.sqrt(p * r)


def nll_ratio(log_joint_value: float, reference: float) -> float:
    """Negative log joint of a method divided by that of the reference."""
    return (-log_joint_value) / (-reference)


def canonical_assignment(c: Sequence) -> tuple:
    return canonicalize(c)
