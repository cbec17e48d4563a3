"""Conjugate likelihood/prior pairs for DP mixture components.

Two families are provided:

* :class:`GaussianModel` -- isotropic Gaussian likelihood with known variance
  and an isotropic Gaussian prior on the cluster mean.
* :class:`DcmModel` -- multinomial likelihood over a vocabulary with a
  symmetric Dirichlet prior (Dirichlet compound multinomial).

Every probability is returned in log space. Cluster sufficient statistics live
in :class:`ClusterStats`; the models never hold per-cluster state themselves.
The DCM marginals omit the per-document multinomial coefficient, which is
constant across clusterings.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np
from scipy.special import gammaln

from .errors import InputError, InvariantError

_LOG_2PI = math.log(2.0 * math.pi)
_uid_counter = itertools.count()


@dataclass
class ClusterStats:
    """Sufficient statistics of the points assigned to one cluster.

    ``moment_sum`` is the coordinate sum for Gaussian data and the per-term
    count total for documents. ``datum_ids`` is only tracked when the caller
    asks for it (samplers, evaluation); search leaves it as ``None``.
    """

    count: int
    moment_sum: np.ndarray
    datum_ids: Optional[set] = None
    uid: int = field(default_factory=lambda: next(_uid_counter), compare=False)

    def copy(self) -> "ClusterStats":
        ids = None if self.datum_ids is None else set(self.datum_ids)
        return ClusterStats(self.count, self.moment_sum.copy(), ids)

    def add(self, x, idx: Optional[int] = None) -> "ClusterStats":
        """Add ``x`` in place and return ``self``."""
        self.count += 1
        self.moment_sum += x
        if self.datum_ids is not None and idx is not None:
            self.datum_ids.add(idx)
        self.uid = next(_uid_counter)
        return self

    def remove(self, x, idx: Optional[int] = None) -> "ClusterStats":
        """Remove ``x`` in place and return ``self``."""
        if self.count <= 0:
            raise InvariantError("cannot remove a point from an empty cluster")
        if self.datum_ids is not None and idx is not None:
            if idx not in self.datum_ids:
                raise InvariantError(f"datum {idx} is not a member of this cluster")
            self.datum_ids.discard(idx)
        self.count -= 1
        self.moment_sum -= x
        self.uid = next(_uid_counter)
        return self


def add_point(stats: ClusterStats, x, idx: Optional[int] = None) -> ClusterStats:
    """Return a new ``ClusterStats`` with ``x`` added; ``stats`` is untouched."""
    return stats.copy().add(np.asarray(x, dtype=float), idx)


def remove_point(stats: ClusterStats, x, idx: Optional[int] = None) -> ClusterStats:
    """Return a new ``ClusterStats`` with ``x`` removed; ``stats`` is untouched."""
    return stats.copy().remove(np.asarray(x, dtype=float), idx)


class ConjugateModel:
    """Interface shared by the conjugate families.

    Subclasses implement the closed-form posterior predictive for one datum and
    for a batch of clusters at once (used by the samplers), plus the replica
    saturation bound used by the admissible search heuristic.
    """

    kind = "abstract"
    width = 0

    def empty_stats(self, track_ids: bool = False) -> ClusterStats:
        return ClusterStats(0, np.zeros(self.width), set() if track_ids else None)

    def stats_from(self, xs, ids: Optional[Iterable[int]] = None) -> ClusterStats:
        xs = np.asarray(xs, dtype=float).reshape(-1, self.width)
        ids_set = None if ids is None else set(ids)
        return ClusterStats(len(xs), xs.sum(axis=0), ids_set)

    def check_datum(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.width,):
            raise InputError(
                f"datum has shape {x.shape}, expected ({self.width},) for {self.kind} model"
            )
        return x

    def check_data(self, data) -> np.ndarray:
        data = np.asarray(data, dtype=float)
        if data.ndim == 1 and self.width == 1:
            data = data.reshape(-1, 1)
        if data.ndim != 2 or data.shape[1] != self.width:
            raise InputError(
                f"data has shape {data.shape}, expected (N, {self.width}) for {self.kind} model"
            )
        return data

    def log_predictive(self, x, stats: ClusterStats) -> float:
        raise NotImplementedError

    def log_predictive_many(self, x, counts, sums) -> np.ndarray:
        raise NotImplementedError

    def log_marginal_set(self, xs) -> float:
        """Log marginal of a set of points, summed as a chain of predictives."""
        xs = self.check_data(xs)
        if len(xs) == 0:
            raise InputError("log_marginal_set needs at least one point")
        stats = self.empty_stats()
        total = 0.0
        for x in xs:
            total += self.log_predictive(x, stats)
            stats.add(x)
        return total

    def log_marginal_closed(self, xs) -> float:
        raise NotImplementedError

    def log_prior_marginals(self, data) -> np.ndarray:
        """``log H(x_n)`` under the prior for every row of ``data``."""
        data = self.check_data(data)
        empty = self.empty_stats()
        return np.array([self.log_predictive(x, empty) for x in data])

    def log_density_ceiling(self) -> float:
        """Upper bound on ``log H(x | S)`` over all data and conditioning sets."""
        raise NotImplementedError

    def replica_norm(self, x) -> float:
        raise NotImplementedError

    def saturated_predictive(self, x, stats: ClusterStats, max_replicas: int,
                             max_norm: Optional[float] = None) -> float:
        raise NotImplementedError


class GaussianModel(ConjugateModel):
    """Isotropic Gaussian likelihood with a Gaussian prior on the mean.

    Parameters
    ----------
    prior_mean : array_like or float
        Prior mean of the cluster centre (broadcast to ``dim``).
    prior_var : float
        Prior variance of the centre, applied per dimension.
    obs_var : float
        Observation noise variance, applied per dimension.
    dim : int
        Data dimension.
    """

    kind = "gauss"

    def __init__(self, prior_mean=0.0, prior_var: float = 10.0, obs_var: float = 1.0,
                 dim: int = 1):
        if not dim >= 1:
            raise InputError(f"dim must be >= 1, got {dim}")
        if not prior_var > 0:
            raise InputError(f"prior_var must be positive, got {prior_var}")
        if not obs_var > 0:
            raise InputError(f"obs_var must be positive, got {obs_var}")
        mean = np.broadcast_to(np.asarray(prior_mean, dtype=float), (dim,)).copy()
        mean.setflags(write=False)
        self.prior_mean = mean
        self.prior_var = float(prior_var)
        self.obs_var = float(obs_var)
        self.dim = int(dim)
        self.width = self.dim
        self._prior_prec = 1.0 / self.prior_var
        self._obs_prec = 1.0 / self.obs_var
        self._prior_term = mean * self._prior_prec

    def __repr__(self):
        return (f"GaussianModel(prior_var={self.prior_var}, obs_var={self.obs_var}, "
                f"dim={self.dim})")

    def _posterior(self, count, moment_sum):
        prec = self._prior_prec + count * self._obs_prec
        mean = (self._prior_term + moment_sum * self._obs_prec) / prec
        return mean, self.obs_var + 1.0 / prec

    def log_predictive(self, x, stats: ClusterStats) -> float:
        x = self.check_datum(x)
        mean, var = self._posterior(stats.count, stats.moment_sum)
        diff = x - mean
        return -0.5 * self.dim * (_LOG_2PI + math.log(var)) - float(diff @ diff) / (2.0 * var)

    def log_predictive_many(self, x, counts, sums) -> np.ndarray:
        prec = counts * self._obs_prec + self._prior_prec
        diff = x - (self._prior_term + sums * self._obs_prec) / prec[:, None]
        var = self.obs_var + 1.0 / prec
        return (-0.5 * self.dim) * (np.log(var) + _LOG_2PI) - np.einsum("ij,ij->i", diff, diff) / (2.0 * var)

    def log_marginal_closed(self, xs) -> float:
        # per dimension, y ~ N(mu0 * 1, obs_var * I + prior_var * 11^T)
        xs = self.check_data(xs)
        n = len(xs)
        if n == 0:
            raise InputError("log_marginal_closed needs at least one point")
        centred = xs - self.prior_mean
        s1 = centred.sum(axis=0)
        s2 = (centred ** 2).sum(axis=0)
        s, t = self.obs_var, self.prior_var
        per_dim = (-0.5 * n * (_LOG_2PI + math.log(s))
                   - 0.5 * math.log1p(n * t / s)
                   - (s2 - t * s1 ** 2 / (s + n * t)) / (2.0 * s))
        return float(per_dim.sum())

    def log_density_ceiling(self) -> float:
        return -0.5 * self.dim * (_LOG_2PI + math.log(self.obs_var))

    def replica_norm(self, x) -> float:
        return float(np.linalg.norm(x))

    def saturated_bounds(self, x, stats: ClusterStats, max_replicas: int,
                         max_norm: Optional[float] = None) -> np.ndarray:
        """Best attainable ``log H(x | S u R)`` for each replica count 0..k.

        ``R`` ranges over every set of ``t`` points whose norms are at most
        ``max_norm``. For a fixed count the predictive variance is fixed, so
        the best set pulls the posterior mean as close to ``x`` as the norm
        budget allows; when that direction is ``x`` itself this is exactly the
        scaled-replica-then-copies construction.
        """
        x = self.check_datum(x)
        if max_replicas < 0:
            raise InputError(f"max_replicas must be >= 0, got {max_replicas}")
        radius = self.replica_norm(x) if max_norm is None else float(max_norm)
        t = np.arange(max_replicas + 1, dtype=float)
        prec = self._prior_prec + (stats.count + t) * self._obs_prec
        base = self._prior_term + stats.moment_sum * self._obs_prec
        gap = np.linalg.norm(prec[:, None] * x[None, :] - base[None, :], axis=1)
        dist = np.maximum(gap - t * radius * self._obs_prec, 0.0) / prec
        var = self.obs_var + 1.0 / prec
        return -0.5 * self.dim * (_LOG_2PI + np.log(var)) - dist ** 2 / (2.0 * var)

    def saturated_predictive(self, x, stats: ClusterStats, max_replicas: int,
                             max_norm: Optional[float] = None) -> float:
        """Upper bound on ``log H(x | S u R)`` over replica sets of size <= k.

        With ``max_replicas == 0`` this is exactly :meth:`log_predictive`.
        """
        bounds = self.saturated_bounds(x, stats, max_replicas, max_norm)
        bounds[0] = self.log_predictive(x, stats)
        return float(bounds.max())


class DcmModel(ConjugateModel):
    """Multinomial documents under a symmetric Dirichlet prior.

    A datum is a length-``vocab`` vector of nonnegative term counts.
    """

    kind = "dcm"

    def __init__(self, concentration: float = 1.0, vocab: int = 2):
        if not concentration > 0:
            raise InputError(f"concentration must be positive, got {concentration}")
        if not vocab >= 2:
            raise InputError(f"vocab must be >= 2, got {vocab}")
        self.concentration = float(concentration)
        self.vocab = int(vocab)
        self.width = self.vocab
        self._total_prior = self.concentration * self.vocab

    def __repr__(self):
        return f"DcmModel(concentration={self.concentration}, vocab={self.vocab})"

    def check_datum(self, x) -> np.ndarray:
        x = super().check_datum(x)
        if np.any(x < 0):
            raise InputError("document term counts must be nonnegative")
        return x

    def log_predictive(self, x, stats: ClusterStats) -> float:
        x = self.check_datum(x)
        support = np.flatnonzero(x)
        length = float(x[support].sum())
        a = self.concentration + stats.moment_sum[support]
        big_a = self._total_prior + float(stats.moment_sum.sum())
        return (math.lgamma(big_a) - math.lgamma(big_a + length)
                + float((gammaln(a + x[support]) - gammaln(a)).sum()))

    def log_predictive_many(self, x, counts, sums) -> np.ndarray:
        support = np.flatnonzero(x)
        xs = x[support]
        a = self.concentration + sums[:, support]
        big_a = self._total_prior + sums.sum(axis=1)
        return (gammaln(big_a) - gammaln(big_a + xs.sum())
                + (gammaln(a + xs) - gammaln(a)).sum(axis=1))

    def log_marginal_closed(self, xs) -> float:
        xs = self.check_data(xs)
        if len(xs) == 0:
            raise InputError("log_marginal_closed needs at least one point")
        totals = xs.sum(axis=0)
        lam = self.concentration
        return float(math.lgamma(self._total_prior) - math.lgamma(self._total_prior + totals.sum())
                     + (gammaln(lam + totals) - gammaln(lam)).sum())

    def log_density_ceiling(self) -> float:
        return 0.0

    def replica_norm(self, x) -> float:
        return float(np.sum(x))

    def saturated_bounds(self, x, stats: ClusterStats, max_replicas: int,
                         max_norm: Optional[float] = None) -> np.ndarray:
        """Best attainable ``log H(x | S u R)`` for each replica count 0..k.

        Each replica document may carry up to ``max_norm`` tokens. Mass placed
        outside the support of ``x`` only lowers the predictive, and each
        support term's gain is concave in the mass it receives, so adding one
        token at a time to the term with the largest gain gives the exact
        optimum for every total mass.
        """
        x = self.check_datum(x)
        if max_replicas < 0:
            raise InputError(f"max_replicas must be >= 0, got {max_replicas}")
        per_replica = self.replica_norm(x) if max_norm is None else float(max_norm)
        per_replica = int(math.floor(per_replica + 1e-9))
        support = np.flatnonzero(x)
        xs = x[support]
        length = float(xs.sum())
        a = (self.concentration + stats.moment_sum[support]).astype(float)
        big_a = self._total_prior + float(stats.moment_sum.sum())
        value = self.log_predictive(x, stats)
        best_at = np.empty(max_replicas + 1)
        best_at[0] = value
        best = value
        heap = [(-math.log((av + xv) / av), k) for k, (av, xv) in enumerate(zip(a, xs))]
        heapq.heapify(heap)
        mass = 0
        for t in range(1, max_replicas + 1):
            for _ in range(per_replica if heap else 0):
                neg_gain, k = heapq.heappop(heap)
                value += (-neg_gain + math.log(big_a + mass) - math.log(big_a + mass + length))
                mass += 1
                a[k] += 1.0
                heapq.heappush(heap, (-math.log((a[k] + xs[k]) / a[k]), k))
                best = max(best, value)
            best_at[t] = best
        return best_at

    def saturated_predictive(self, x, stats: ClusterStats, max_replicas: int,
                             max_norm: Optional[float] = None) -> float:
        """Upper bound on ``log H(x | S u R)`` over replica sets of size <= k."""
        return float(self.saturated_bounds(x, stats, max_replicas, max_norm)[-1])


def log_predictive(model: ConjugateModel, x, stats: ClusterStats) -> float:
    return model.log_predictive(x, stats)


def log_marginal_set(model: ConjugateModel, xs) -> float:
    return model.log_marginal_set(xs)


def saturated_predictive(model: ConjugateModel, x, stats: ClusterStats, max_replicas: int,
                         max_norm: Optional[float] = None) -> float:
    return model.saturated_predictive(x, stats, max_replicas, max_norm)


def build_model(kind: str, *, dim: int = 1, vocab: int = 2, prior_var: float = 10.0,
                obs_var: float = 1.0, concentration: float = 1.0, prior_mean=0.0):
    """Construct a model from a CLI-style family name."""
    if kind in ("gauss", "gaussian"):
        return GaussianModel(prior_mean, prior_var, obs_var, dim)
    if kind == "dcm":
        return DcmModel(concentration, vocab)
    raise InputError(f"unknown model family {kind!r}")
