"""Command-line entry point: ``dpsearch <command> [options]``.

Every algorithm command prints one JSON document. Exit status is 0 on
success, 1 on bad input and 2 when an internal consistency check fails.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import data as data_io
from .bench import BenchConfig, config_dict, run_benchmark, summarize, trend_report
from .errors import InputError, InvariantError
from .mcmc import INITS, run_protocol
from .models import build_model
from .oracle import exhaustive_map, pairwise_fscore, precision_recall
from .prior import canonicalize
from .search import dpsearch


def _beam(value: str):
    if value.lower() in ("inf", "infinity", "none", "unbounded"):
        return None
    try:
        beam = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError(f"beam must be an integer or 'inf', got {value!r}")
    if beam < 1:
        raise argparse.ArgumentTypeError("beam must be >= 1")
    return beam


def _shared(p: argparse.ArgumentParser, needs_data: bool = True) -> None:
    p.add_argument("--model", choices=("gauss", "dcm"), default="gauss")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--prior-var", type=float, default=10.0)
    p.add_argument("--obs-var", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0,
                   help="symmetric Dirichlet parameter for --model dcm")
    p.add_argument("--vocab", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    if needs_data:
        p.add_argument("--data", required=True, help="input data file")
        p.add_argument("--format", choices=data_io.FORMATS, default=None,
                       help="defaults to dense-csv for gauss, sparse-triplet for dcm")
        p.add_argument("--truth", default=None, help="optional truth labels, one per line")
    p.add_argument("--out", default=None, help="write output here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dpsearch",
                                     description="MAP clustering for DP mixture models")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="sample a synthetic Gaussian or document dataset")
    _shared(p, needs_data=False)
    p.add_argument("-n", "--num-points", type=int, required=True)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--doc-length", type=int, default=10)
    p.add_argument("--truth-out", default=None,
                   help="truth label file (default: <out>.truth)")

    p = sub.add_parser("cluster", help="search for a MAP clustering")
    _shared(p)
    p.add_argument("--scorer", choices=("trivial", "admissible", "inadmissible"),
                   default="inadmissible")
    p.add_argument("--beam", type=_beam, default=100)
    p.add_argument("--order", choices=("asc", "desc", "given", "random"), default="asc")
    p.add_argument("--time-limit", type=float, default=None)

    for name in ("gibbs", "splitmerge"):
        p = sub.add_parser(name, help=f"best-of-runs {name} sampling protocol")
        _shared(p)
        p.add_argument("--iters", type=int, default=1000)
        p.add_argument("--runs", type=int, default=15)
        p.add_argument("--init", choices=INITS, default="protocol")
        p.add_argument("--restricted-scans", type=int, default=5)
        p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("exact", help="exhaustive MAP for small datasets")
    _shared(p)
    p.add_argument("--max-n", type=int, default=12)

    p = sub.add_parser("eval", help="pairwise f-score between two assignment files")
    p.add_argument("pred")
    p.add_argument("truth")
    p.add_argument("--out", default=None)

    p = sub.add_parser("bench", help="run the synthetic benchmark matrix")
    _shared(p, needs_data=False)
    p.add_argument("--sizes", default="4,6,8,10,11,12,13,14,15,20,25,30,50")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--dim", type=int, default=2)
    p.add_argument("--iters", type=int, default=1000)
    p.add_argument("--runs", type=int, default=15)
    p.add_argument("--beam", type=int, default=10)
    p.add_argument("--time-limit", type=float, default=30.0,
                   help="per-search wall-time cap in seconds")
    p.add_argument("--samplers", default="gibbs,splitmerge")
    p.add_argument("--workers", type=int, default=1)
    return parser


def _emit(doc, out) -> None:
    text = json.dumps(doc, indent=None if isinstance(doc, list) else 2, allow_nan=True)
    if out:
        Path(out).write_text(text + "\n")
    else:
        print(text)


def _load(args):
    fmt = args.format or ("sparse-triplet" if args.model == "dcm" else "dense-csv")
    ds = data_io.load(args.data, fmt, args.truth, args.vocab if args.model == "dcm" else None)
    if args.model == "dcm":
        model = build_model("dcm", vocab=args.vocab or ds.dim, concentration=args.lam)
    else:
        model = build_model("gauss", dim=ds.dim, prior_var=args.prior_var, obs_var=args.obs_var)
    return ds, model


def _config(args, **extra) -> dict:
    cfg = dict(model=args.model, alpha=args.alpha, prior_var=args.prior_var,
               obs_var=args.obs_var, lam=args.lam, vocab=args.vocab, data=args.data)
    cfg.update(extra)
    return cfg


def _with_truth(doc: dict, ds) -> dict:
    if ds.truth is not None:
        doc["fscore"] = pairwise_fscore(doc["assignment"], ds.truth)
    return doc


def cmd_generate(args):
    if args.model == "dcm":
        ds = data_io.generate_documents(args.num_points, args.vocab or 5, args.alpha, args.lam,
                                        args.doc_length, args.seed)
        fmt = "sparse-triplet"
    else:
        ds = data_io.generate(args.num_points, args.dim, args.alpha, args.prior_var,
                              args.obs_var, args.seed)
        fmt = "dense-csv"
    if args.out:
        truth_out = args.truth_out or args.out + ".truth"
        data_io.save(ds, args.out, fmt, truth_out)
        _emit(dict(data=args.out, truth=truth_out, format=fmt, n=ds.n, dim=ds.dim,
                   num_clusters=len(set(ds.truth)), config=ds.provenance), None)
    else:
        sys.stdout.write(data_io.dumps(ds, fmt))


def cmd_cluster(args):
    ds, model = _load(args)
    order = {"asc": "ascending", "desc": "descending"}.get(args.order, args.order)
    res = dpsearch(ds.points, model, args.alpha, args.scorer, args.beam, order, args.seed,
                   time_limit=args.time_limit)
    doc = dict(algorithm="search",
               config=_config(args, scorer=args.scorer,
                              beam="inf" if args.beam is None else args.beam, order=order),
               log_joint=res.log_joint, num_clusters=res.num_clusters,
               assignment=list(res.assignment), enqueued=res.enqueued, dequeued=res.dequeued,
               wall_time_ms=res.wall_time * 1e3, seed=args.seed, order=list(res.order_used))
    _emit(_with_truth(doc, ds), args.out)


def cmd_sampler(args):
    ds, model = _load(args)
    start = time.perf_counter()
    best, records = run_protocol(ds.points, model, args.alpha, args.command, args.iters,
                                 args.seed, args.runs, args.init, args.restricted_scans,
                                 args.workers)
    doc = dict(algorithm=args.command,
               config=_config(args, iters=args.iters, runs=args.runs, init=args.init,
                              restricted_scans=args.restricted_scans),
               log_joint=best.best_log_joint, num_clusters=len(set(best.best_assignment)),
               assignment=list(best.best_assignment), enqueued=None, dequeued=None,
               wall_time_ms=best.time_to_best * 1e3, seed=args.seed,
               order=list(range(ds.n)), best_run=best.run_index,
               iteration_of_best=best.iteration_of_best,
               total_time_ms=(time.perf_counter() - start) * 1e3,
               run_bests=[r.best_log_joint for r in records])
    _emit(_with_truth(doc, ds), args.out)


def cmd_exact(args):
    ds, model = _load(args)
    start = time.perf_counter()
    c = exhaustive_map(ds.points, model, args.alpha, args.max_n)
    doc = dict(algorithm="exact", config=_config(args, max_n=args.max_n),
               log_joint=c.log_joint, num_clusters=c.num_clusters,
               assignment=list(c.assignment), enqueued=None, dequeued=None,
               wall_time_ms=(time.perf_counter() - start) * 1e3, seed=args.seed,
               order=list(range(ds.n)))
    _emit(_with_truth(doc, ds), args.out)


def read_assignment(path) -> tuple:
    """Labels from a JSON run document or a one-label-per-line text file."""
    text = Path(path).read_text()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})")
        if "assignment" not in doc:
            raise InputError(f"{path}: JSON document has no 'assignment' field")
        return tuple(doc["assignment"])
    labels = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if line.strip():
            try:
                labels.append(int(line.strip()))
            except ValueError:
                raise InputError(f"{path}:{lineno}: label {line.strip()!r} is not an integer")
    return tuple(labels)


def cmd_eval(args):
    pred = read_assignment(args.pred)
    truth = read_assignment(args.truth)
    p, r = precision_recall(pred, truth)
    _emit(dict(fscore=pairwise_fscore(pred, truth),
               fscore_harmonic=pairwise_fscore(pred, truth, harmonic=True),
               precision=p, recall=r), args.out)


def cmd_bench(args):
    try:
        sizes = [int(s) for s in args.sizes.split(",") if s.strip()]
    except ValueError:
        raise InputError(f"--sizes must be comma-separated integers, got {args.sizes!r}")
    config = BenchConfig(alpha=args.alpha, dim=args.dim, prior_var=args.prior_var,
                         obs_var=args.obs_var, beam=args.beam, iters=args.iters, runs=args.runs,
                         samplers=tuple(s for s in args.samplers.split(",") if s),
                         search_time_limit=args.time_limit, base_seed=args.seed,
                         workers=args.workers)
    rows = run_benchmark(sizes, args.repeats, config)
    if args.out:
        with open(args.out, "w") as fh:
            for row in rows:
                row.pop("traceback", None)
                fh.write(json.dumps(row) + "\n")
    summary = dict(config=config_dict(config), summary=summarize(rows),
                   trends=trend_report(rows), rows_file=args.out)
    _emit(summary, None)


COMMANDS = dict(generate=cmd_generate, cluster=cmd_cluster, gibbs=cmd_sampler,
                splitmerge=cmd_sampler, exact=cmd_exact, eval=cmd_eval, bench=cmd_bench)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (InputError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except InvariantError as exc:
        print(f"internal error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
