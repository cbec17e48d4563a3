"""The partition side of the joint: count vectors and their probabilities.

A clustering of N points is summarised by its count vector ``m`` where
``m[i]`` is the number of clusters holding exactly ``i`` points. Its
probability under a DP with concentration ``alpha`` is

    N! / alpha^(N) * alpha^K / prod_i (i^m_i * m_i!)

with ``alpha^(N)`` the rising factorial and ``K = sum_i m_i``. This module
evaluates that quantity, the one-point change factors, and the best
completion of a partial count vector.
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from functools import lru_cache
from typing import Hashable, Mapping, Sequence, Union

import numpy as np

from .errors import InputError

NEW = "new"
Action = Union[str, int]


def log_rising_factorial(alpha: float, n: int) -> float:
    return math.lgamma(alpha + n) - math.lgamma(alpha)


@dataclass(frozen=True)
class MVector:
    """Counts of clusters by size, with the total point count and ``alpha``.

    ``counts`` is stored as a sorted tuple of ``(size, multiplicity)`` pairs
    with zero multiplicities dropped, so two equal vectors hash equally.
    """

    counts: tuple
    n_total: int
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise InputError(f"alpha must be positive, got {self.alpha}")
        total = 0
        for size, mult in self.counts:
            if size < 1 or mult < 0:
                raise InputError(f"invalid count entry m[{size}] = {mult}")
            total += size * mult
        if total != self.n_total:
            raise InputError(f"sum of i*m_i is {total}, but n_total is {self.n_total}")

    @classmethod
    def from_counts(cls, counts: Mapping[int, int], alpha: float) -> "MVector":
        items = tuple(sorted((int(i), int(c)) for i, c in counts.items() if c))
        return cls(items, sum(i * c for i, c in items), float(alpha))

    @classmethod
    def empty(cls, alpha: float) -> "MVector":
        return cls((), 0, float(alpha))

    def as_dict(self) -> dict:
        return dict(self.counts)

    def get(self, size: int) -> int:
        for i, c in self.counts:
            if i == size:
                return c
        return 0

    @property
    def num_clusters(self) -> int:
        return sum(c for _, c in self.counts)

    def sizes(self) -> list:
        """Cluster sizes in decreasing order."""
        return sorted((i for i, c in self.counts for _ in range(c)), reverse=True)

    def apply(self, action: Action) -> "MVector":
        m = self.as_dict()
        _apply_inplace(m, action)
        return MVector.from_counts(m, self.alpha)


def _apply_inplace(m: dict, action: Action) -> None:
    if action == NEW:
        m[1] = m.get(1, 0) + 1
        return
    size = int(action)
    if m.get(size, 0) < 1:
        raise InputError(f"cannot grow a cluster of size {size}: none exist")
    m[size] -= 1
    if m[size] == 0:
        del m[size]
    m[size + 1] = m.get(size + 1, 0) + 1


def _log_prob_counts(items, n: int, alpha: float) -> float:
    k = 0
    penalty = 0.0
    for size, mult in items:
        k += mult
        penalty += mult * math.log(size) + math.lgamma(mult + 1)
    return math.lgamma(n + 1) - log_rising_factorial(alpha, n) + k * math.log(alpha) - penalty


def log_prob_m(m: MVector) -> float:
    """Log probability of the count vector ``m``."""
    return _log_prob_counts(m.counts, m.n_total, m.alpha)


def canonicalize(labels: Sequence[Hashable]) -> tuple:
    """Relabel clusters 0, 1, 2, ... in order of first appearance."""
    seen = {}
    out = []
    for lab in labels:
        if lab not in seen:
            seen[lab] = len(seen)
        out.append(seen[lab])
    return tuple(out)


def is_canonical(labels: Sequence[int]) -> bool:
    top = -1
    for lab in labels:
        if lab > top + 1 or lab < 0:
            return False
        top = max(top, lab)
    return True


def c_to_m(c: Sequence[Hashable], alpha: float) -> MVector:
    """Count vector of an assignment vector (labels may be any hashables)."""
    return MVector.from_counts(Counter(Counter(c).values()), alpha)


def log_crp_partition(c: Sequence[Hashable], alpha: float) -> float:
    """Log probability of one labelled set partition under the CRP.

    Summing this over every partition with count vector ``m`` recovers
    :func:`log_prob_m`; the samplers and the posterior oracle work at this
    partition level.
    """
    sizes = Counter(c).values()
    n = sum(sizes)
    return (len(sizes) * math.log(alpha) + sum(math.lgamma(s) for s in sizes)
            - log_rising_factorial(alpha, n))


def delta_log(m: MVector, action: Action) -> float:
    """Log change factor for adding one point via ``action``.

    ``"new"`` opens a singleton; an integer ``l`` grows a cluster of size
    ``l``. The factor omits ``(N+1)/(alpha+N)``, which every action shares.
    """
    return _delta(m.as_dict(), action, m.alpha)


def _delta(m: Mapping[int, int], action: Action, alpha: float) -> float:
    if action == NEW:
        return math.log(alpha) - math.log(m.get(1, 0) + 1)
    size = int(action)
    mult = m.get(size, 0)
    if mult < 1:
        raise InputError(f"cannot grow a cluster of size {size}: none exist")
    return (math.log(size) - math.log(size + 1) + math.log(mult)
            - math.log(m.get(size + 1, 0) + 1))


def _greedy_action(m: dict, alpha: float):
    """Argmax of the change factor; ties go to the largest size, then ``new``."""
    best_action = NEW
    best = _delta(m, NEW, alpha)
    for size in sorted(m, reverse=True):
        val = _delta(m, size, alpha)
        if val > best or (best_action == NEW and val == best):
            best, best_action = val, size
    return best_action


def _largest_absorbs_rest(m: dict, alpha: float) -> bool:
    """True when growing the unique largest cluster stays the greedy choice forever.

    Once the largest cluster moves on, every other change factor is frozen, and
    the grow-largest factor only increases, so it suffices to compare against
    the other factors as they will be after that first move.
    """
    largest = max(m)
    if largest < 2 or m[largest] != 1:
        return False
    grow = math.log(largest) - math.log(largest + 1)
    if grow < math.log(alpha) - math.log(m.get(1, 0) + 1):
        return False
    for size, mult in m.items():
        if size == largest:
            continue
        above = 0 if size + 1 == largest else m.get(size + 1, 0)
        if grow < math.log(size) - math.log(size + 1) + math.log(mult) - math.log(above + 1):
            return False
    return True


def _greedy_complete(items: tuple, remaining: int, alpha: float, accelerate: bool) -> tuple:
    m = dict(items)
    while remaining > 0:
        action = _greedy_action(m, alpha)
        grew_largest = action != NEW and action == max(m)
        _apply_inplace(m, action)
        remaining -= 1
        if accelerate and remaining and grew_largest and _largest_absorbs_rest(m, alpha):
            largest = max(m)
            del m[largest]
            m[largest + remaining] = 1
            remaining = 0
    return tuple(sorted(m.items()))


@lru_cache(maxsize=1_000_000)
def _greedy_cached(items: tuple, n_target: int, alpha: float, accelerate: bool) -> float:
    n0 = sum(i * c for i, c in items)
    final = _greedy_complete(items, n_target - n0, alpha, accelerate)
    return _log_prob_counts(final, n_target, alpha)


def greedy_completion(m0: MVector, n_target: int, accelerate: bool = True) -> MVector:
    """The count vector reached by greedily adding ``n_target - N0`` points."""
    if n_target < m0.n_total:
        raise InputError(f"n_target {n_target} is below the current size {m0.n_total}")
    final = _greedy_complete(m0.counts, n_target - m0.n_total, m0.alpha, accelerate)
    return MVector(final, n_target, m0.alpha)


def max_completion_log_prob(m0: MVector, n_target: int, accelerate: bool = True) -> float:
    """Greedy completion score of ``m0`` to ``n_target`` points (memoised).

    Each remaining point takes the action with the largest change factor;
    the completed vector is then scored with :func:`log_prob_m`. With
    ``accelerate`` the loop stops as soon as the largest cluster provably
    absorbs every remaining point, giving the same vector in one step.

    Greedy is fast but not always optimal; :func:`exact_completion_log_prob`
    gives the true maximum.
    """
    if n_target < m0.n_total:
        raise InputError(f"n_target {n_target} is below the current size {m0.n_total}")
    return _greedy_cached(m0.counts, int(n_target), m0.alpha, bool(accelerate))


@lru_cache(maxsize=1_000_000)
def _exact_cached(items: tuple, n_target: int, alpha: float) -> float:
    existing = sorted((i for i, c in items for _ in range(c)), reverse=True)
    k0 = len(existing)
    n = n_target
    # need[t]: existing clusters of size >= t; the completion must keep at least
    # that many clusters of size >= t (each existing cluster can only grow)
    need = np.zeros(n + 2, dtype=int)
    for s in existing:
        need[1:s + 1] += 1
    neg = -np.inf
    # table[c, p]: best sum of per-size terms over sizes processed so far, with
    # p points used and min(c, k0) clusters counted
    table = np.full((k0 + 1, n + 1), neg)
    table[0, 0] = 0.0
    log_alpha = math.log(alpha)
    for size in range(n, 0, -1):
        nxt = table.copy()
        unit = log_alpha - math.log(size)
        for mult in range(1, n // size + 1):
            gain = mult * unit - math.lgamma(mult + 1)
            shift = size * mult
            for c in range(k0 + 1):
                row = table[c, : n + 1 - shift]
                tgt = min(k0, c + mult)
                np.maximum(nxt[tgt, shift:], row + gain, out=nxt[tgt, shift:])
        if need[size] > 0:
            nxt[: need[size], :] = neg
        table = nxt
    best = table[k0, n]
    return math.lgamma(n + 1) - log_rising_factorial(alpha, n) + float(best)


def exact_completion_log_prob(m0: MVector, n_target: int) -> float:
    """Exact maximum of :func:`log_prob_m` over all completions of ``m0``.

    A completion grows existing clusters and opens new ones until
    ``n_target`` points are placed. Feasible final count vectors are exactly
    those whose t-th largest cluster is at least the t-th largest existing
    cluster; a dynamic program over cluster sizes maximises under that
    constraint. Cost is roughly ``N^2 K log N``, fine for the small problems
    where admissible search is tractable.
    """
    if n_target < m0.n_total:
        raise InputError(f"n_target {n_target} is below the current size {m0.n_total}")
    return _exact_cached(m0.counts, int(n_target), m0.alpha)


def clear_caches() -> None:
    _greedy_cached.cache_clear()
    _exact_cached.cache_clear()
