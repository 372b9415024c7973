"""Command-line entry point.

Exit status: 0 on success, 1 when a computation fails, 2 for usage or I/O
problems.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace

from .citest import fisher_z_ci_test, hybrid_ci_test, permutation_ci_test
from .core import (DataError, Dataset, EstimatorConfig, format_edge_list, load_dataset, save_dataset,
                   write_edge_list)
from .estimators import conditional_mutual_information, entropy, mutual_information
from .eval import (cell_seeds, method_from_name, run_benchmark, run_external_benchmark, write_results_csv,
                   write_summary_json)
from .structure import and_rule, learn_blankets
from .synthdata import (MECHANISMS, NOISE_FAMILIES, POST_TRANSFORMS, TOPOLOGIES, GeneratorSpec,
                        ecdf_transform)

WORKERS_ENV = "KNNMI_GRAPH_WORKERS"

EXIT_OK = 0
EXIT_COMPUTE = 1
EXIT_USAGE = 2


class UsageError(Exception):
    pass


def _default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def _add_estimator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=3, help="neighbour count (default 3)")
    p.add_argument("--permutations", "-T", type=int, default=200, help="permutations per test")
    p.add_argument("--alpha", type=float, default=0.05, help="significance level")
    p.add_argument("--shortcut", type=float, default=0.001,
                   help="CMI threshold (nats) below which permutations may be skipped")
    p.add_argument("--seed", type=int, default=0)


def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--topology", choices=TOPOLOGIES, default="small")
    p.add_argument("--mechanism", choices=MECHANISMS, default="nonlinear")
    p.add_argument("--noise", choices=NOISE_FAMILIES, default="gaussian")
    p.add_argument("--post-transform", choices=POST_TRANSFORMS, default="none")
    p.add_argument("--p", type=int, default=10, help="variables for the random topology")
    p.add_argument("--edge-prob", type=float, default=None, help="edge probability (default 3/p)")
    p.add_argument("--copies", type=int, default=3, help="blocks for replicated-small")


def _names(arg: str | None) -> list[str]:
    return [s.strip() for s in arg.split(",") if s.strip()] if arg else []


def _config(args) -> EstimatorConfig:
    return EstimatorConfig(k=args.k, permutations=args.permutations, alpha=args.alpha,
                           shortcut_threshold=args.shortcut, seed=args.seed)


def _load(path: str) -> Dataset:
    if not os.path.isfile(path):
        raise UsageError(f"input file not found: {path}")
    try:
        return load_dataset(path)
    except DataError as e:
        raise UsageError(str(e)) from None


def _select(data: Dataset, names: list[str]):
    try:
        idx = [data.index_of(n) for n in names]
    except KeyError as e:
        raise UsageError(e.args[0]) from None
    return data.values[:, idx] if idx else None


def _log_config(args, **extra) -> None:
    cfg = {k: v for k, v in vars(args).items() if k != "func"}
    cfg.update(extra)
    print("config: " + json.dumps(cfg, sort_keys=True), file=sys.stderr)


def cmd_learn(args) -> int:
    data = _load(args.input)
    method = method_from_name(args.method + ("+ecdf" if args.ecdf else ""), _config(args))
    learner = method.learner
    learner = replace(learner, max_blanket_size=args.max_blanket_size,
                      parallel_nodes=args.workers > 1, workers=args.workers)
    _log_config(args)
    t0 = time.perf_counter()
    if method.preprocess == "ecdf":
        data = ecdf_transform(data)
    searches = learn_blankets(data, learner)
    graph = and_rule([s.blanket for s in searches], data.p)
    wall = time.perf_counter() - t0
    if args.out:
        write_edge_list(graph, data.names, args.out)
    else:
        sys.stdout.write(format_edge_list(graph, data.names))
    print(f"p={data.p} n={data.n} edges={len(graph)} tests={sum(s.tests for s in searches)} "
          f"shortcuts={sum(s.shortcuts for s in searches)} wall={wall:.2f}s", file=sys.stderr)
    return EXIT_OK


def cmd_estimate(args) -> int:
    data = _load(args.input)
    x = _select(data, _names(args.x))
    y = _select(data, _names(args.y))
    z = _select(data, _names(args.z))
    if x is None:
        raise UsageError("--x is required")
    _log_config(args)
    if y is None:
        value = entropy(x, args.k, seed=args.seed)
    elif z is None:
        value = mutual_information(x, y, args.k, seed=args.seed)
    else:
        value = conditional_mutual_information(x, y, z, args.k, seed=args.seed)
    print(repr(float(value)))
    return EXIT_OK


def cmd_citest(args) -> int:
    data = _load(args.input)
    xs, ys = _names(args.x), _names(args.y)
    if len(xs) != 1 or len(ys) != 1:
        raise UsageError("--x and --y must each name exactly one column")
    x = _select(data, xs)[:, 0]
    y = _select(data, ys)[:, 0]
    z = _select(data, _names(args.z))
    cfg = _config(args)
    _log_config(args)
    if args.method == "fisher-z":
        res = fisher_z_ci_test(x, y, z, cfg.alpha)
    elif args.method == "permutation-mi":
        res = permutation_ci_test(x, y, z, cfg)
    else:
        res = hybrid_ci_test(x, y, z, cfg)
    print(json.dumps(res.to_dict(), sort_keys=True))
    return EXIT_OK


def _spec(args) -> GeneratorSpec:
    return GeneratorSpec(topology=args.topology, mechanism=args.mechanism, noise=args.noise,
                         post_transform=args.post_transform, p=args.p, edge_prob=args.edge_prob,
                         copies=args.copies)


def cmd_generate(args) -> int:
    spec = _spec(args)
    truth_path = args.truth or os.path.splitext(args.out)[0] + ".edges.txt"
    _log_config(args, truth=truth_path)
    data, graph = spec.generate(args.n, args.seed)
    try:
        save_dataset(data, args.out)
        write_edge_list(graph, data.names, truth_path)
    except OSError as e:
        raise UsageError(f"cannot write output: {e}") from None
    print(f"wrote {data.n}x{data.p} data to {args.out}, {len(graph)} true edges to {truth_path}",
          file=sys.stderr)
    return EXIT_OK


def cmd_benchmark(args) -> int:
    cfg = _config(args)
    methods = [method_from_name(m, cfg) for m in _names(args.methods)]
    if not methods:
        raise UsageError("--methods must name at least one method")
    if args.audit_dir:
        os.makedirs(args.audit_dir, exist_ok=True)
    if args.external:
        pairs = []
        for item in args.external:
            d, sep, t = item.partition(":")
            if not sep:
                raise UsageError(f"--external expects DATA.csv:TRUTH.txt, got {item!r}")
            for path in (d, t):
                if not os.path.isfile(path):
                    raise UsageError(f"input file not found: {path}")
            pairs.append((d, t))
        _log_config(args)
        results = run_external_benchmark(pairs, methods, args.seed, workers=args.workers,
                                         audit_dir=args.audit_dir)
        spec_doc = {"topology": "external"}
    else:
        sizes = [int(s) for s in _names(args.sizes)]
        spec = _spec(args)
        _log_config(args)
        for n in sizes:
            for r in range(args.reps):
                data_seed, learn_seed = cell_seeds(args.seed, n, r)
                print(f"cell n={n} rep={r} data_seed={data_seed} learner_seed={learn_seed}",
                      file=sys.stderr)
        results = run_benchmark(spec, methods, sizes, args.reps, args.seed, workers=args.workers,
                                audit_dir=args.audit_dir)
        spec_doc = {"topology": spec.topology, "mechanism": spec.mechanism, "noise": spec.noise,
                    "post_transform": spec.post_transform, "p": spec.p, "edge_prob": spec.edge_prob,
                    "copies": spec.copies, "sizes": sizes, "reps": args.reps}
    config_doc = {"seed": args.seed, "k": cfg.k, "permutations": cfg.permutations,
                  "alpha": cfg.alpha, "shortcut": cfg.shortcut_threshold,
                  "methods": [m.name for m in methods], "generator": spec_doc}
    write_results_csv(results, args.out)
    if args.summary:
        write_summary_json(results, args.summary, config_doc)
    for r in results:
        print(f"{r.method:>18} n={r.n:<6} mean={r.mean:.3f} sem={r.sem:.3f} failed={r.failed}",
              file=sys.stderr)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="knnmi-graph",
        description="Non-parametric Markov network structure learning with kNN mutual information.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("learn", help="learn a graph from a CSV dataset")
    p.add_argument("--input", required=True)
    p.add_argument("--out", help="edge list output (default: stdout)")
    p.add_argument("--method", choices=("knnmi-and", "fisherz-and"), default="knnmi-and")
    p.add_argument("--ecdf", action="store_true", help="apply the shrunken-ECDF transform first")
    p.add_argument("--max-blanket-size", type=int, default=None)
    p.add_argument("--workers", type=int, default=_default_workers())
    _add_estimator_flags(p)
    p.set_defaults(func=cmd_learn)

    p = sub.add_parser("estimate", help="entropy, MI or CMI of named columns (nats)")
    p.add_argument("--input", required=True)
    p.add_argument("--x", required=True, help="comma-separated column names")
    p.add_argument("--y", help="comma-separated column names (omit for entropy of x)")
    p.add_argument("--z", help="comma-separated conditioning columns")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("citest", help="conditional independence test, printed as JSON")
    p.add_argument("--input", required=True)
    p.add_argument("--x", required=True)
    p.add_argument("--y", required=True)
    p.add_argument("--z")
    p.add_argument("--method", choices=("hybrid", "permutation-mi", "fisher-z"), default="hybrid")
    _add_estimator_flags(p)
    p.set_defaults(func=cmd_citest)

    p = sub.add_parser("generate", help="write a synthetic dataset and its true edge list")
    _add_generator_flags(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset CSV path")
    p.add_argument("--truth", help="edge list path (default: <out stem>.edges.txt)")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("benchmark", help="Hamming-distance sweep over sample sizes")
    _add_generator_flags(p)
    p.add_argument("--methods", default="knnmi-and,fisherz-and",
                   help="comma-separated; each may carry a +ecdf suffix")
    p.add_argument("--sizes", default="125,250,500,1000,2000")
    p.add_argument("--reps", type=int, default=25)
    p.add_argument("--external", action="append", metavar="DATA.csv:TRUTH.txt",
                   help="score externally generated data instead of generating (repeatable)")
    p.add_argument("--out", required=True, help="per-cell results CSV")
    p.add_argument("--summary", help="JSON summary path")
    p.add_argument("--audit-dir", help="dump estimated and true edge lists per cell")
    p.add_argument("--workers", type=int, default=_default_workers())
    _add_estimator_flags(p)
    p.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DataError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
