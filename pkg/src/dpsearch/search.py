"""Best-first and beam search for MAP clusterings of a DP mixture.

States are clusterings of a prefix of the (ordered) data. Each dequeued state
is expanded by placing the next point into every existing cluster and into a
new one; children are scored by an upper bound (or an estimate) of the best
joint reachable from them. With an admissible scorer and no beam limit the
first complete state dequeued is the exact MAP clustering.
"""
from __future__ import annotations

import heapq
import itertools
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import InputError, InvariantError, SearchBudgetExceeded
from .models import ClusterStats, ConjugateModel
from .prior import (MVector, canonicalize, exact_completion_log_prob, log_prob_m,
                    max_completion_log_prob)

SCORERS = ("trivial", "admissible", "inadmissible")
ORDERS = ("ascending", "descending", "given", "random")
_ORDER_ALIASES = {"asc": "ascending", "desc": "descending"}


@dataclass
class SearchState:
    """A clustering of the first ``depth`` points.

    The prefix is stored as a parent chain so that expanding a state costs
    O(K) rather than O(depth); use :meth:`prefix` to materialise it.
    """

    parent: Optional["SearchState"]
    label: int
    depth: int
    stats: tuple
    counts: tuple  # sorted (size, multiplicity) pairs of the prefix
    log_data_prefix: float
    score: float = 0.0

    @property
    def num_clusters(self) -> int:
        return len(self.stats)

    def prefix(self) -> tuple:
        labels = []
        node = self
        while node is not None and node.depth > 0:
            labels.append(node.label)
            node = node.parent
        return tuple(reversed(labels))

    def m_vector(self, alpha: float) -> MVector:
        return MVector(self.counts, self.depth, alpha)


@dataclass
class SearchResult:
    assignment: tuple  # canonical labels in the caller's data order
    log_joint: float
    enqueued: int
    dequeued: int
    wall_time: float
    order_used: tuple
    scorer: str = ""
    beam: Optional[int] = None

    @property
    def num_clusters(self) -> int:
        return len(set(self.assignment))


def _bump(counts: tuple, old_size: int) -> tuple:
    """Counts after one cluster grows from ``old_size`` (0 means a new cluster)."""
    m = dict(counts)
    if old_size:
        m[old_size] -= 1
        if not m[old_size]:
            del m[old_size]
    m[old_size + 1] = m.get(old_size + 1, 0) + 1
    return tuple(sorted(m.items()))


def root_state() -> SearchState:
    return SearchState(None, -1, 0, (), (), 0.0)


def extend(state: SearchState, label: int, x, model: ConjugateModel) -> SearchState:
    """Child of ``state`` with the next point ``x`` placed in cluster ``label``."""
    k = state.num_clusters
    if label > k or label < 0:
        raise InputError(f"label {label} is not an existing cluster or the next new one")
    if label == k:
        base = model.empty_stats()
        old_size = 0
    else:
        base = state.stats[label]
        old_size = base.count
    lp = model.log_predictive(x, base)
    new = base.copy().add(x)
    stats = state.stats[:label] + (new,) + state.stats[label + 1:]
    return SearchState(state, label, state.depth + 1, stats, _bump(state.counts, old_size),
                       state.log_data_prefix + lp)


def state_from_prefix(prefix: Sequence[int], data, model: ConjugateModel) -> SearchState:
    """Build a state by replaying a canonical prefix."""
    data = model.check_data(data)
    state = root_state()
    for n, lab in enumerate(prefix):
        state = extend(state, lab, data[n], model)
    return state


class Scorer:
    """Scores search states for one ordered dataset.

    ``trivial`` and ``admissible`` bound the best completion from above and use
    the exact completion of the count vector; ``inadmissible`` uses the greedy
    completion and scores every unplaced point as a singleton.
    """

    def __init__(self, name: str, data, model: ConjugateModel, alpha: float):
        if name not in SCORERS:
            raise InputError(f"unknown scorer {name!r}; expected one of {SCORERS}")
        self.name = name
        self.model = model
        self.data = model.check_data(data)
        self.alpha = float(alpha)
        self.n = len(self.data)
        self.ceiling = max(0.0, model.log_density_ceiling())
        self._prior_cache = {}
        if name == "inadmissible":
            prior = model.log_prior_marginals(self.data)
            self._suffix = np.concatenate([np.cumsum(prior[::-1])[::-1], [0.0]])
        if name == "admissible":
            norms = [model.replica_norm(x) for x in self.data]
            self.max_norm = max(norms) if norms else 0.0
            self._empty = model.empty_stats()
            self._sat_cache = {}

    def prior_bound(self, state: SearchState) -> float:
        key = state.counts
        val = self._prior_cache.get(key)
        if val is None:
            m0 = MVector(state.counts, state.depth, self.alpha)
            if self.name == "inadmissible":
                val = max_completion_log_prob(m0, self.n)
            else:
                val = exact_completion_log_prob(m0, self.n)
            self._prior_cache[key] = val
        return val

    def saturated(self, n: int, stats: ClusterStats, budget: int) -> float:
        key = (stats.uid, n, budget)
        val = self._sat_cache.get(key)
        if val is None:
            val = self.model.saturated_predictive(self.data[n], stats, budget, self.max_norm)
            self._sat_cache[key] = val
        return val

    def data_bound(self, state: SearchState) -> float:
        depth = state.depth
        if self.name == "trivial":
            return state.log_data_prefix + (self.n - depth) * self.ceiling
        if self.name == "inadmissible":
            return state.log_data_prefix + float(self._suffix[depth])
        total = state.log_data_prefix
        options = state.stats + (self._empty,)
        for n in range(depth, self.n):
            budget = n - depth
            total += max(self.saturated(n, st, budget) for st in options)
        return total

    def __call__(self, state: SearchState) -> float:
        if state.depth == self.n:
            return log_prob_m(MVector(state.counts, state.depth, self.alpha)) + state.log_data_prefix
        return self.prior_bound(state) + self.data_bound(state)


def score_state(state: SearchState, data, model: ConjugateModel, alpha: float,
                scorer: str) -> float:
    """Score one state against the full ordered ``data`` (see :class:`Scorer`)."""
    return Scorer(scorer, data, model, alpha)(state)


def order_data(data, model: ConjugateModel, strategy: str = "ascending",
               seed: Optional[int] = None) -> np.ndarray:
    """Permutation of the data indices.

    ``ascending`` sorts points by increasing prior marginal likelihood so that
    the least typical points are placed first; ``descending`` reverses it.
    """
    data = model.check_data(data)
    strategy = _ORDER_ALIASES.get(strategy, strategy)
    n = len(data)
    if strategy == "given":
        return np.arange(n)
    if strategy == "random":
        return np.random.default_rng(seed).permutation(n)
    if strategy in ("ascending", "descending"):
        perm = np.argsort(model.log_prior_marginals(data), kind="stable")
        return perm if strategy == "ascending" else perm[::-1].copy()
    raise InputError(f"unknown order strategy {strategy!r}; expected one of {ORDERS}")


def dpsearch(data, model: ConjugateModel, alpha: float = 1.0, scorer: str = "inadmissible",
             beam: Optional[int] = 100, order: str = "ascending", seed: Optional[int] = None,
             max_dequeued: Optional[int] = None, time_limit: Optional[float] = None
             ) -> SearchResult:
    """Search for a MAP clustering.

    Parameters
    ----------
    data : array_like, shape (N, D)
    model : ConjugateModel
    alpha : float
        DP concentration.
    scorer : {"trivial", "admissible", "inadmissible"}
    beam : int or None
        Queue size kept after each expansion; ``None`` means unbounded.
    order : {"ascending", "descending", "given", "random"}
        Order in which points are placed (see :func:`order_data`).
    max_dequeued, time_limit : optional
        Abort with :class:`SearchBudgetExceeded` past these limits.

    Ties in score go to the deeper state, then to the earlier enqueued one.
    """
    data = model.check_data(data)
    if len(data) == 0:
        raise InputError("data must be non-empty")
    if not alpha > 0:
        raise InputError(f"alpha must be positive, got {alpha}")
    if beam is not None and beam < 1:
        raise InputError(f"beam must be >= 1 or None, got {beam}")
    start = time.perf_counter()
    perm = order_data(data, model, order, seed)
    ordered = data[perm]
    score = Scorer(scorer, ordered, model, alpha)
    n = len(ordered)

    seq = itertools.count()
    root = root_state()
    root.score = score(root)
    queue = [(-root.score, 0, next(seq), root)]
    enqueued, dequeued = 1, 0
    while queue:
        _, _, _, state = heapq.heappop(queue)
        dequeued += 1
        if state.depth == n:
            break
        if max_dequeued is not None and dequeued > max_dequeued:
            raise SearchBudgetExceeded(f"dequeued more than {max_dequeued} states",
                                       enqueued, dequeued, time.perf_counter() - start)
        if time_limit is not None and time.perf_counter() - start > time_limit:
            raise SearchBudgetExceeded(f"exceeded time limit of {time_limit}s",
                                       enqueued, dequeued, time.perf_counter() - start)
        x = ordered[state.depth]
        for label in range(state.num_clusters + 1):
            child = extend(state, label, x, model)
            child.score = score(child)
            heapq.heappush(queue, (-child.score, -child.depth, next(seq), child))
            enqueued += 1
        if beam is not None and len(queue) > beam:
            queue = heapq.nsmallest(beam, queue)
    else:
        raise InvariantError("search queue emptied without reaching a complete clustering")

    prefix = state.prefix()
    labels = np.empty(n, dtype=int)
    labels[perm] = prefix
    return SearchResult(canonicalize(labels.tolist()), state.score, enqueued, dequeued,
                        time.perf_counter() - start, tuple(int(i) for i in perm),
                        scorer, beam)
