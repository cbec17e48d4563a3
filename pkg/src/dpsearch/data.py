"""Datasets: synthetic generation from the DP mixture and file I/O.

Two on-disk formats are supported:

``dense-csv``
    one point per line, comma-separated reals.
``sparse-triplet``
    lines ``doc_id term_id count`` with 0-based integer ids.

A truth file holds one integer label per line.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError
from .prior import canonicalize

FORMATS = ("dense-csv", "sparse-triplet")


@dataclass
class Dataset:
    kind: str  # "dense" or "sparse"
    points: np.ndarray
    provenance: dict = field(default_factory=dict)
    truth: Optional[tuple] = None

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __post_init__(self):
        if self.kind not in ("dense", "sparse"):
            raise InputError(f"unknown dataset kind {self.kind!r}")
        if self.points.ndim != 2:
            raise InputError("points must be a 2-D array")
        if self.truth is not None and len(self.truth) != len(self.points):
            raise InputError("truth labels do not match the number of points")


def _crp_partition(n: int, alpha: float, rng: np.random.Generator) -> list:
    labels = []
    sizes = []
    for i in range(n):
        weights = np.array(sizes + [alpha], dtype=float)
        k = int(np.searchsorted(np.cumsum(weights), rng.random() * (i + alpha), side="right"))
        k = min(k, len(sizes))
        if k == len(sizes):
            sizes.append(0)
        sizes[k] += 1
        labels.append(k)
    return labels


def generate(n: int, dim: int = 2, alpha: float = 1.0, prior_var: float = 10.0,
             obs_var: float = 1.0, seed: int = 0) -> Dataset:
    """Sample Gaussian data from a DP mixture.

    The partition is drawn sequentially from the CRP, each cluster centre from
    N(0, prior_var I), and each point from N(centre, obs_var I).
    """
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    if not alpha > 0 or not prior_var > 0 or not obs_var > 0:
        raise InputError("alpha, prior_var and obs_var must be positive")
    rng = np.random.default_rng(seed)
    labels = _crp_partition(n, alpha, rng)
    centres = rng.normal(0.0, math.sqrt(prior_var), size=(max(labels) + 1, dim))
    points = centres[labels] + rng.normal(0.0, math.sqrt(obs_var), size=(n, dim))
    config = dict(generator="gauss", n=n, dim=dim, alpha=alpha, prior_var=prior_var,
                  obs_var=obs_var, seed=seed)
    return Dataset("dense", points, config, canonicalize(labels))


def generate_documents(n: int, vocab: int = 5, alpha: float = 1.0, concentration: float = 1.0,
                       doc_length: int = 10, seed: int = 0) -> Dataset:
    """Sample bag-of-words documents from a Dirichlet-multinomial DP mixture."""
    if n < 1:
        raise InputError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    labels = _crp_partition(n, alpha, rng)
    topics = rng.dirichlet(np.full(vocab, concentration), size=max(labels) + 1)
    points = np.array([rng.multinomial(doc_length, topics[k]) for k in labels], dtype=float)
    config = dict(generator="dcm", n=n, vocab=vocab, alpha=alpha,
                  concentration=concentration, doc_length=doc_length, seed=seed)
    return Dataset("sparse", points, config, canonicalize(labels))


def _load_dense(lines, path):
    rows = []
    width = None
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        try:
            row = [float(v) for v in line.split(",")]
        except ValueError:
            raise InputError(f"{path}:{lineno}: cannot parse {line.strip()!r} as reals")
        if width is None:
            width = len(row)
        elif len(row) != width:
            raise InputError(f"{path}:{lineno}: expected {width} values, found {len(row)}")
        rows.append(row)
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.array(rows, dtype=float)


def _load_sparse(lines, path, vocab=None):
    triples = []
    for lineno, line in enumerate(lines, 1):
        if not line.strip():
            continue
        parts = line.split()
        try:
            doc, term, count = (int(v) for v in parts)
        except ValueError:
            raise InputError(f"{path}:{lineno}: expected 'doc_id term_id count', got {line.strip()!r}")
        if doc < 0 or term < 0 or count < 0:
            raise InputError(f"{path}:{lineno}: ids and counts must be nonnegative")
        if vocab is not None and term >= vocab:
            raise InputError(f"{path}:{lineno}: term id {term} exceeds vocabulary size {vocab}")
        triples.append((doc, term, count))
    if not triples:
        raise InputError(f"{path}: no data rows")
    n_docs = max(t[0] for t in triples) + 1
    width = vocab if vocab is not None else max(t[1] for t in triples) + 1
    width = max(width, 2)
    points = np.zeros((n_docs, width))
    for doc, term, count in triples:
        points[doc, term] += count
    return points


def load_truth(path) -> tuple:
    labels = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            labels.append(int(line.strip()))
        except ValueError:
            raise InputError(f"{path}:{lineno}: truth label {line.strip()!r} is not an integer")
    return tuple(labels)


def load(path, fmt: str = "dense-csv", truth_path=None, vocab: Optional[int] = None) -> Dataset:
    path = Path(path)
    if fmt not in FORMATS:
        raise InputError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    if not path.exists():
        raise InputError(f"{path}: no such file")
    lines = path.read_text().splitlines()
    if fmt == "dense-csv":
        ds = Dataset("dense", _load_dense(lines, path), {"source": str(path)})
    else:
        ds = Dataset("sparse", _load_sparse(lines, path, vocab), {"source": str(path)})
    if truth_path is not None:
        truth = load_truth(truth_path)
        if len(truth) != ds.n:
            raise InputError(f"{truth_path}: {len(truth)} labels for {ds.n} points")
        ds.truth = truth
    return ds


def _fmt_number(v: float) -> str:
    return repr(float(v))


def dumps(ds: Dataset, fmt: str = "dense-csv") -> str:
    if fmt == "dense-csv":
        return "".join(",".join(_fmt_number(v) for v in row) + "\n" for row in ds.points)
    if fmt == "sparse-triplet":
        out = []
        for doc, row in enumerate(ds.points):
            for term in np.flatnonzero(row):
                out.append(f"{doc} {term} {int(round(row[term]))}\n")
        return "".join(out)
    raise InputError(f"unknown format {fmt!r}; expected one of {FORMATS}")


def save(ds: Dataset, path, fmt: str = "dense-csv", truth_path=None) -> None:
    Path(path).write_text(dumps(ds, fmt))
    if truth_path is not None and ds.truth is not None:
        Path(truth_path).write_text("".join(f"{lab}\n" for lab in ds.truth))
