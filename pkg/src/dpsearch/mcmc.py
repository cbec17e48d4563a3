"""Collapsed Gibbs and split-merge samplers used as MCMC baselines.

Both samplers target the DP posterior over labelled partitions (CRP prior
times the conjugate marginal likelihood). Alongside the chain they track the
same MAP objective that search maximises (count-vector prior plus data), so
runs can be compared on one scale.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .errors import InputError, InvariantError
from .models import ClusterStats, ConjugateModel
from .oracle import log_joint as full_log_joint
from .prior import canonicalize, log_rising_factorial

SAMPLERS = ("gibbs", "splitmerge")
INITS = ("single", "separate", "random", "protocol")


class ChainState:
    """Assignment plus array-backed cluster statistics for one chain.

    Clusters occupy slots in ``counts``/``sums``; a slot is freed as soon as
    its cluster empties. ``z`` holds slot ids, which stay stable within a
    sweep; :attr:`assignment` gives canonical labels.
    """

    def __init__(self, data, model: ConjugateModel, alpha: float, z, rng_seed=None):
        self.data = model.check_data(data)
        self.model = model
        self.alpha = float(alpha)
        n = len(self.data)
        if len(z) != n:
            raise InputError(f"initial assignment has length {len(z)}, data has {n}")
        self.z = np.array(canonicalize(list(z)), dtype=int)
        self.counts = np.zeros(n, dtype=int)
        self.sums = np.zeros((n, model.width))
        np.add.at(self.counts, self.z, 1)
        np.add.at(self.sums, self.z, self.data)
        self.rng_seed = rng_seed
        self.iteration = 0
        self._log_prior0 = math.lgamma(n + 1) - log_rising_factorial(self.alpha, n)
        self._log_alpha = math.log(self.alpha)
        self.prior_marginals = model.log_prior_marginals(self.data)
        with np.errstate(divide="ignore"):
            self._log_count = np.log(np.arange(n + 1, dtype=float))
        self.recompute()

    # -- count-vector bookkeeping ------------------------------------------
    def _m_term(self, size: int) -> float:
        mult = self._m.get(size, 0)
        return mult * math.log(size) + math.lgamma(mult + 1)

    def _resize(self, old: int, new: int) -> None:
        """One cluster changes size from ``old`` to ``new`` (0 = absent)."""
        for size, step in ((old, -1), (new, +1)):
            if size == 0:
                continue
            before = self._m_term(size)
            self._m[size] = self._m.get(size, 0) + step
            self._penalty += self._m_term(size) - before
            if not self._m[size]:
                del self._m[size]
        self._k += (new > 0) - (old > 0)

    def recompute(self) -> float:
        """Rebuild every cached quantity from the assignment; returns the log joint."""
        self._m = {}
        self._penalty = 0.0
        self._k = 0
        for size in self.counts[self.counts > 0]:
            self._resize(0, int(size))
        self.data_term = 0.0
        for slot in np.flatnonzero(self.counts):
            self.data_term += self.model.log_marginal_closed(self.data[self.z == slot])
        return self.log_joint

    @property
    def log_joint(self) -> float:
        return self._log_prior0 + self._k * self._log_alpha - self._penalty + self.data_term

    @property
    def assignment(self) -> tuple:
        return canonicalize(self.z.tolist())

    @property
    def num_clusters(self) -> int:
        return self._k

    def cluster_stats(self) -> List[ClusterStats]:
        """Per-cluster statistics with member ids, in canonical label order."""
        out = []
        seen = []
        for slot in self.z:
            if slot not in seen:
                seen.append(slot)
        for slot in seen:
            ids = set(np.flatnonzero(self.z == slot).tolist())
            out.append(ClusterStats(int(self.counts[slot]), self.sums[slot].copy(), ids))
        return out

    def active_slots(self) -> np.ndarray:
        return np.flatnonzero(self.counts)

    def free_slot(self) -> int:
        return int(np.flatnonzero(self.counts == 0)[0])

    def _stats(self, slot) -> ClusterStats:
        return ClusterStats(int(self.counts[slot]), self.sums[slot])

    def move(self, n: int, target: int, lp_remove: float, lp_add: float) -> None:
        """Move point ``n`` to slot ``target`` given both predictive terms."""
        src = self.z[n]
        x = self.data[n]
        old_src = int(self.counts[src])
        self.counts[src] -= 1
        self.sums[src] -= x
        self._resize(old_src, old_src - 1)
        self.data_term -= lp_remove
        if self.counts[src] == 0:
            self.sums[src] = 0.0
        old_t = int(self.counts[target])
        self.counts[target] += 1
        self.sums[target] += x
        self._resize(old_t, old_t + 1)
        self.data_term += lp_add
        self.z[n] = target


def _sample_log_weights(rng, logw: np.ndarray) -> int:
    cdf = np.exp(logw - logw.max()).cumsum()
    return int(cdf.searchsorted(rng.random() * cdf[-1], side="right"))


def gibbs_sweep(state: ChainState, rng: np.random.Generator) -> ChainState:
    """One collapsed Gibbs pass over every point, in index order.

    Point ``n`` joins a new cluster with weight ``alpha * H(x_n)`` or an
    existing cluster ``d`` with weight ``N_{-n,d} * H(x_n | x_d \\ x_n)``.
    """
    model = state.model
    data = state.data
    counts, sums = state.counts, state.sums
    prior = state.prior_marginals
    new_weight = state._log_alpha + prior
    slots = state.active_slots()
    for n in range(len(data)):
        x = data[n]
        src = state.z[n]
        own = int(slots.searchsorted(src))
        cnt = counts[slots]
        cnt[own] -= 1
        sm = sums[slots]
        sm[own] -= x
        lps = model.log_predictive_many(x, cnt, sm)
        # the cluster's predictive without x is also the term x contributed to it
        lp_remove = float(lps[own]) if cnt[own] else float(prior[n])
        logw = np.empty(len(slots) + 1)
        logw[:-1] = state._log_count[cnt]
        logw[:-1] += lps
        logw[-1] = new_weight[n]
        pick = _sample_log_weights(rng, logw)
        if pick == len(slots):
            target = src if cnt[own] == 0 else state.free_slot()
            lp_add = float(prior[n])
        else:
            target = int(slots[pick])
            lp_add = float(lps[pick])
        if target != src:
            state.move(n, target, lp_remove, lp_add)
            if counts[src] == 0 or counts[target] == 1:
                slots = state.active_slots()
        else:
            state.data_term += lp_add - lp_remove
    return state


def _restricted_scan(state: ChainState, members, side, stats_a, stats_b, rng,
                     forced=None) -> float:
    """One restricted Gibbs scan over ``members`` between two clusters.

    ``side[k]`` is 0 for cluster A and 1 for B and is updated in place. When
    ``forced`` is given the scan follows those sides instead of sampling and
    the return value is the probability of that path; otherwise it is the
    probability of the sampled path.
    """
    model = state.model
    log_q = 0.0
    for pos, k in enumerate(members):
        x = state.data[k]
        cur = side[pos]
        (stats_a if cur == 0 else stats_b).remove(x)
        la = math.log(stats_a.count) + model.log_predictive(x, stats_a)
        lb = math.log(stats_b.count) + model.log_predictive(x, stats_b)
        top = max(la, lb)
        norm = top + math.log(math.exp(la - top) + math.exp(lb - top))
        if forced is None:
            new = 0 if rng.random() < math.exp(la - norm) else 1
        else:
            new = forced[pos]
        log_q += (la if new == 0 else lb) - norm
        side[pos] = new
        (stats_a if new == 0 else stats_b).add(x)
    return log_q


def _launch(state: ChainState, i: int, j: int, members, restricted_scans: int, rng):
    side = rng.integers(0, 2, size=len(members))
    model = state.model
    stats_a = model.stats_from(state.data[[i] + [k for k, s in zip(members, side) if s == 0]])
    stats_b = model.stats_from(state.data[[j] + [k for k, s in zip(members, side) if s == 1]])
    for _ in range(restricted_scans):
        _restricted_scan(state, members, side, stats_a, stats_b, rng)
    return side, stats_a, stats_b


def _log_crp_split_gain(alpha: float, n_a: int, n_b: int) -> float:
    """Log CRP prior ratio of two clusters of sizes ``n_a``, ``n_b`` to their union."""
    return math.log(alpha) + math.lgamma(n_a) + math.lgamma(n_b) - math.lgamma(n_a + n_b)


def propose_split_merge(state: ChainState, i: int, j: int, restricted_scans: int,
                        rng: np.random.Generator):
    """Build a split or merge proposal anchored on points ``i`` and ``j``.

    Returns ``(kind, log_ratio, groups)`` where ``log_ratio`` is the log
    Metropolis-Hastings acceptance ratio and ``groups`` the proposed member
    lists (one list for a merge, two for a split).
    """
    if i == j:
        raise InputError("split-merge anchors must be distinct points")
    model = state.model
    data = state.data
    ci, cj = state.z[i], state.z[j]
    if ci == cj:
        members = [k for k in np.flatnonzero(state.z == ci).tolist() if k not in (i, j)]
    else:
        members = [k for k in np.flatnonzero((state.z == ci) | (state.z == cj)).tolist()
                   if k not in (i, j)]
    side, stats_a, stats_b = _launch(state, i, j, members, restricted_scans, rng)

    if ci == cj:
        log_q = _restricted_scan(state, members, side, stats_a, stats_b, rng)
        group_a = [i] + [k for k, s in zip(members, side) if s == 0]
        group_b = [j] + [k for k, s in zip(members, side) if s == 1]
        merged = [i, j] + members
        log_ratio = (_log_crp_split_gain(state.alpha, len(group_a), len(group_b))
                     + model.log_marginal_closed(data[group_a])
                     + model.log_marginal_closed(data[group_b])
                     - model.log_marginal_closed(data[merged])
                     - log_q)
        return "split", log_ratio, (group_a, group_b)

    original = [0 if state.z[k] == ci else 1 for k in members]
    log_q = _restricted_scan(state, members, side, stats_a, stats_b, rng, forced=original)
    group_a = np.flatnonzero(state.z == ci).tolist()
    group_b = np.flatnonzero(state.z == cj).tolist()
    merged = sorted(group_a + group_b)
    log_ratio = (-_log_crp_split_gain(state.alpha, len(group_a), len(group_b))
                 + model.log_marginal_closed(data[merged])
                 - model.log_marginal_closed(data[group_a])
                 - model.log_marginal_closed(data[group_b])
                 + log_q)
    return "merge", log_ratio, (merged,)


def _apply_groups(state: ChainState, kind: str, groups) -> None:
    model = state.model
    data = state.data
    if kind == "merge":
        (merged,) = groups
        slots = sorted(set(state.z[merged].tolist()))
        keep, gone = slots[0], slots[1]
        for slot in slots:
            state.data_term -= model.log_marginal_closed(data[state.z == slot])
            state._resize(int(state.counts[slot]), 0)
        state.z[merged] = keep
        state.counts[keep] = len(merged)
        state.counts[gone] = 0
        state.sums[keep] = data[merged].sum(axis=0)
        state.sums[gone] = 0.0
        state._resize(0, len(merged))
        state.data_term += model.log_marginal_closed(data[merged])
        return
    group_a, group_b = groups
    slot = state.z[group_a[0]]
    state.data_term -= model.log_marginal_closed(data[state.z == slot])
    state._resize(int(state.counts[slot]), 0)
    state.counts[slot] = len(group_a)
    other = state.free_slot()
    for grp, s in ((group_a, slot), (group_b, other)):
        state.z[grp] = s
        state.counts[s] = len(grp)
        state.sums[s] = data[grp].sum(axis=0)
        state._resize(0, len(grp))
        state.data_term += model.log_marginal_closed(data[grp])


def split_merge_step(state: ChainState, rng: np.random.Generator, restricted_scans: int = 5,
                     gibbs_sweeps: int = 1) -> ChainState:
    """One split-merge Metropolis-Hastings move followed by ``gibbs_sweeps`` Gibbs passes."""
    n = len(state.data)
    if n < 2:
        raise InputError("split-merge needs at least two data points")
    i, j = (int(v) for v in rng.choice(n, size=2, replace=False))
    kind, log_ratio, groups = propose_split_merge(state, i, j, restricted_scans, rng)
    if log_ratio >= 0 or rng.random() < math.exp(log_ratio):
        _apply_groups(state, kind, groups)
    for _ in range(gibbs_sweeps):
        gibbs_sweep(state, rng)
    return state


@dataclass
class RunRecord:
    best_log_joint: float
    best_assignment: tuple
    iteration_of_best: int
    time_to_best: float
    trace: List[float] = field(default_factory=list)
    init: str = ""
    run_index: int = 0
    total_time: float = 0.0


def initial_assignment(kind: str, n: int, rng: np.random.Generator) -> list:
    """Starting labels: one cluster, all singletons, or ``ceil(log2 N)`` random clusters."""
    if kind == "single":
        return [0] * n
    if kind == "separate":
        return list(range(n))
    if kind == "random":
        k = max(1, math.ceil(math.log2(n))) if n > 1 else 1
        return rng.integers(0, k, size=n).tolist()
    raise InputError(f"unknown initialisation {kind!r}")


def run_chain(data, model: ConjugateModel, alpha: float, sampler: str, iters: int,
              init, seed: int = 0, run_index: int = 0, restricted_scans: int = 5) -> RunRecord:
    """Run one chain for ``iters`` iterations and keep its best sample.

    An iteration is one Gibbs sweep, or one split-merge move plus one sweep.
    ``init`` is an initialisation name or an explicit assignment.
    """
    if sampler not in SAMPLERS:
        raise InputError(f"unknown sampler {sampler!r}; expected one of {SAMPLERS}")
    if iters < 1:
        raise InputError(f"iters must be >= 1, got {iters}")
    rng = np.random.default_rng([int(seed), int(run_index)])
    data = model.check_data(data)
    start = time.perf_counter()
    z = initial_assignment(init, len(data), rng) if isinstance(init, str) else list(init)
    state = ChainState(data, model, alpha, z, rng_seed=(seed, run_index))
    if sampler == "splitmerge" and len(data) < 2:
        sampler = "gibbs"
    record = RunRecord(-math.inf, (), 0, 0.0, [], init if isinstance(init, str) else "given",
                       run_index)
    for it in range(1, iters + 1):
        if sampler == "gibbs":
            gibbs_sweep(state, rng)
        else:
            split_merge_step(state, rng, restricted_scans)
        state.iteration = it
        value = state.log_joint
        record.trace.append(value)
        if value > record.best_log_joint:
            record.best_log_joint = value
            record.best_assignment = state.assignment
            record.iteration_of_best = it
            record.time_to_best = time.perf_counter() - start
    record.total_time = time.perf_counter() - start
    drift = abs(state.log_joint - state.recompute())
    if drift > 1e-6:
        raise InvariantError(f"incremental log joint drifted by {drift:g}")
    return record


def protocol_inits(runs: int = 15) -> List[str]:
    """Five single-cluster, five all-singleton, five random starts (cycled for other counts)."""
    order = ("single", "separate", "random")
    block = max(1, runs // 3)
    return [order[min(r // block, 2)] for r in range(runs)]


def _run_job(args):
    return run_chain(*args)


def run_protocol(data, model: ConjugateModel, alpha: float, sampler: str = "gibbs",
                 iters: int = 1000, seed: int = 0, runs: int = 15, init: str = "protocol",
                 restricted_scans: int = 5, workers: int = 1):
    """Best-of-``runs`` sampling protocol.

    Returns ``(best, records)``: the run with the highest best log joint and
    every run's record. Its ``time_to_best`` is measured within that single
    run. Each run draws from its own stream seeded by ``(seed, run_index)``,
    so parallel and serial execution agree exactly.
    """
    if init not in INITS:
        raise InputError(f"unknown init {init!r}; expected one of {INITS}")
    if runs < 1:
        raise InputError(f"runs must be >= 1, got {runs}")
    inits = protocol_inits(runs) if init == "protocol" else [init] * runs
    jobs = [(data, model, alpha, sampler, iters, inits[r], seed, r, restricted_scans)
            for r in range(runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_job, jobs))
    else:
        records = [_run_job(job) for job in jobs]
    best = max(records, key=lambda r: (r.best_log_joint, -r.run_index))
    return best, records


def check_record(record: RunRecord, data, model: ConjugateModel, alpha: float,
                 tol: float = 1e-6) -> None:
    """Raise if a record's best log joint does not match its assignment."""
    recomputed = full_log_joint(record.best_assignment, data, model, alpha)
    if abs(recomputed - record.best_log_joint) > tol:
        raise InvariantError(
            f"record log joint {record.best_log_joint} != recomputed {recomputed}")
