"""Command-line interface: ``netel <subcommand> [options]``.

Every subcommand accepts ``--config FILE`` (INI, see ``configfile``),
``--seed`` and ``--out DIR``; flags override config-file values.
"""
from __future__ import annotations

import argparse
import csv
import logging
import math
import os
import sys

import numpy as np

from ..chisq import chisq_quantile, chisq_sf
from ..elcore import moment_blocks, profile_interval
from ..estfuns import EstimatingFunctionError, by_name
from ..graph import GraphError, gen_erdos_renyi, load_edge_list, save_edge_list, spanning_tree
from ..netsim import run_decentralized_blocks
from .configfile import ConfigError, build, read_config
from .data import estimating_function, generate_data, true_theta
from .experiments import (RUNNERS, build_graph, experiment_coverage, experiment_iterations,
                          experiment_rho_sweep, statistic, write_rows)

log = logging.getLogger("netel")


def _floats(text):
    return tuple(float(x) for x in text.split(",") if x.strip())


def _ints(text):
    return tuple(int(x) for x in text.split(",") if x.strip())


def _common(p, experiment=True):
    p.add_argument("--config", help="INI file with [experiment] / [solver] sections")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory (created if missing)")
    p.add_argument("-v", "--verbose", action="store_true")
    if not experiment:
        return
    p.add_argument("--family", choices=["quantile", "linear", "logistic", "mean", "repeated"])
    p.add_argument("--d", type=int, help="covariate dimension")
    p.add_argument("--K", type=int, help="number of nodes")
    p.add_argument("--n", type=int, help="observations per node")
    p.add_argument("--graph", choices=["er", "tree", "complete"])
    p.add_argument("--p", dest="p_g", type=float, help="edge probability for er graphs")
    p.add_argument("--tree-p", dest="tree_p", type=float,
                   help="edge probability of the graph a tree is extracted from (1 = complete)")
    p.add_argument("--reps", type=int)
    p.add_argument("--levels", type=_floats)
    p.add_argument("--tau", type=float)
    p.add_argument("--eta-rule", dest="eta_rule", choices=["strict", "relaxed"])
    p.add_argument("--rho", type=float, help="ADMM penalty (default n)")
    p.add_argument("--eta", type=float, help="fusion weight (default N^2)")
    p.add_argument("--max-iter", dest="max_iter", type=int)
    p.add_argument("--eps-abs", dest="eps_abs", type=float)
    p.add_argument("--eps-rel", dest="eps_rel", type=float)
    p.add_argument("--workers", type=int, default=1)


def make_parser():
    parser = argparse.ArgumentParser(prog="netel", description="Decentralized empirical likelihood.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="EL ratio test of one theta on one synthetic instance")
    _common(p)
    p.add_argument("--algo", choices=["pcm", "maom", "reference"], default="maom")
    p.add_argument("--theta", type=_floats, help="comma-separated parameter (default: the truth)")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--decentralized", action="store_true",
                   help="run through the message-passing simulator and write its traffic tally")

    p = sub.add_parser("coverage", help="empirical coverage at the true parameter")
    _common(p)
    p.add_argument("--methods", default="pcm,maom,reference")
    p.add_argument("--interval-methods", dest="interval_methods", default="reference",
                   help="methods whose profile intervals give mean_length ('' for none)")

    p = sub.add_parser("iterations", help="iterations and time per topology")
    _common(p)
    p.add_argument("--topologies", default="tree,er:0.1,er:0.3,complete")
    p.add_argument("--dims", type=_ints, help="comma-separated d values (default: --d)")
    p.add_argument("--sizes", type=_ints, help="comma-separated n values (default: --n)")
    p.add_argument("--algos", default="pcm,maom")

    p = sub.add_parser("rho-sweep", help="iterations against rho = m n")
    _common(p)
    p.add_argument("--mults", type=_floats, default=(0.01, 0.1, 1.0, 10.0, 100.0))
    p.add_argument("--algos", default="pcm,maom")

    p = sub.add_parser("graph", help="generate a graph or extract its spanning tree")
    gsub = p.add_subparsers(dest="graph_command", required=True)
    g = gsub.add_parser("gen", help="Erdos-Renyi graph, redrawn until connected")
    _common(g, experiment=False)
    g.add_argument("--K", type=int, required=True)
    g.add_argument("--p", type=float, required=True)
    g.add_argument("--file", help="edge-list path (default <out>/graph.txt)")
    g = gsub.add_parser("tree", help="breadth-first spanning tree of an edge-list file")
    _common(g, experiment=False)
    g.add_argument("--input", help="edge-list path (default <out>/graph.txt)")
    g.add_argument("--file", help="output path (default <out>/tree.txt)")

    p = sub.add_parser("interval", help="profile confidence interval on a synthetic instance")
    _common(p)
    p.add_argument("--algo", choices=["pcm", "maom", "reference"], default="reference")
    p.add_argument("--index", type=int, default=0, help="0-based parameter component")
    p.add_argument("--level", type=float, default=0.95)

    p = sub.add_parser("ingest-csv", help="profile intervals for a regression on a CSV file")
    _common(p, experiment=False)
    p.add_argument("--csv", required=True, help="file with a header row")
    p.add_argument("--response", required=True, help="response column name")
    p.add_argument("--covariates", help="comma-separated column names (default: all others)")
    p.add_argument("--family", choices=["linear", "logistic"], default="logistic")
    p.add_argument("--K", type=int, default=10)
    p.add_argument("--p", dest="p_g", type=float, default=0.3)
    p.add_argument("--algo", choices=["pcm", "maom", "reference"], default="maom")
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--no-intercept", action="store_true")
    return parser


def _setup(args):
    exp, sol = {}, {}
    if getattr(args, "config", None):
        exp, sol = read_config(args.config)
    for key in ("family", "d", "K", "n", "graph", "p_g", "tree_p", "reps", "levels", "seed",
                "tau", "eta_rule"):
        val = getattr(args, key, None)
        if val is not None:
            exp[key] = val
    for key in ("rho", "eta", "max_iter", "eps_abs", "eps_rel"):
        val = getattr(args, key, None)
        if val is not None:
            sol[key] = val
    return build(exp, sol)


def _outdir(args):
    out = args.out or "."
    os.makedirs(out, exist_ok=True)
    return out


def cmd_solve(args):
    spec, cfg = _setup(args)
    ef = estimating_function(spec)
    theta = np.array(args.theta) if args.theta is not None else true_theta(spec)
    data = generate_data(spec)
    graph = build_graph(spec, spec.seed)
    blocks = moment_blocks(data, ef, theta)
    iters = 0
    if args.decentralized and args.algo != "reference":
        _, report, cert = run_decentralized_blocks(args.algo, graph, blocks, cfg)
        stat, iters, ok = report.final_statistic, report.iterations, report.converged
        out = _outdir(args)
        cert.to_csv(os.path.join(out, "traffic.csv"))
        report.to_csv(os.path.join(out, "trace.csv"))
        print(f"locality certificate: {'clean' if cert.clean else 'VIOLATIONS'}; "
              f"{report.messages['total_messages']} messages")
    else:
        stat, iters, ok = statistic(args.algo, graph, blocks, cfg)
        if args.out and args.algo != "reference":
            _, report = RUNNERS[args.algo](graph, blocks, cfg.__class__(**{**cfg.__dict__, "record_statistic": True}))
            report.to_csv(os.path.join(_outdir(args), "trace.csv"))
    thr = chisq_quantile(ef.r, args.level)
    pval = chisq_sf(stat, ef.r) if math.isfinite(stat) else 0.0
    decision = "reject" if stat > thr else "do not reject"
    conv = "" if ok else " (solver hit max_iter)"
    print(f"statistic = {stat:.6g}  p-value = {pval:.4g}  chi2_{ef.r} threshold({args.level}) = "
          f"{thr:.4f}  -> {decision}  [{args.algo}, {iters} iterations{conv}]")
    return 0


def cmd_coverage(args):
    spec, cfg = _setup(args)
    methods = [m for m in args.methods.split(",") if m]
    ivm = [m for m in args.interval_methods.split(",") if m]
    res = experiment_coverage(spec, methods, ivm, cfg, workers=args.workers)
    path = os.path.join(_outdir(args), "coverage.csv")
    res.to_csv(path)
    for row in res.rows:
        print(f"{row['method']:>9}  {row['level']:.2f}  coverage={row['coverage']:.3f}  "
              f"mean_length={row['mean_length']:.4g}  failed={row['n_failed']}")
    print(f"wrote {path}")
    return 0


def cmd_iterations(args):
    spec, cfg = _setup(args)
    dims = args.dims or (spec.d,)
    sizes = args.sizes or (spec.n,)
    grid = [(d, n) for d in dims for n in sizes]
    rows = experiment_iterations(spec, args.topologies.split(","), grid, args.algos.split(","),
                                 cfg, workers=args.workers)
    path = os.path.join(_outdir(args), "iterations.csv")
    write_rows(path, rows)
    for row in rows:
        print(f"{row['topology']:>9} d={row['d']} n={row['n']} {row['algo']:>4}  "
              f"iters={row['mean_iters']:.1f}  time={row['mean_time_s']:.3f}s  "
              f"per-iter={1e3 * row['median_iter_time_s']:.2f}ms")
    print(f"wrote {path}")
    return 0


def cmd_rho(args):
    spec, cfg = _setup(args)
    rows = experiment_rho_sweep(spec, args.mults, args.algos.split(","), cfg, workers=args.workers)
    path = os.path.join(_outdir(args), "rho.csv")
    write_rows(path, rows)
    for row in rows:
        print(f"rho={row['rho']:<10g} {row['algo']:>4}  iters={row['mean_iters']:.1f}  "
              f"converged={row['converged_frac']:.2f}")
    print(f"wrote {path}")
    return 0


def cmd_graph(args):
    if args.graph_command == "gen":
        g = gen_erdos_renyi(args.K, args.p, seed=args.seed)
        path = args.file or os.path.join(_outdir(args), "graph.txt")
    else:
        src = args.input or os.path.join(args.out or ".", "graph.txt")
        g = spanning_tree(load_edge_list(src))
        path = args.file or os.path.join(_outdir(args), "tree.txt")
    save_edge_list(g, path)
    print(f"K={g.K} M={g.M} -> {path}")
    return 0


def cmd_interval(args):
    spec, cfg = _setup(args)
    ef = estimating_function(spec)
    data = generate_data(spec)
    graph = build_graph(spec, spec.seed)
    ci = profile_interval(ef, data, args.index, args.level, solver=args.algo, graph=graph, config=cfg)
    print(f"theta[{args.index}]: estimate {ci.estimate:.6g}, {args.level:.0%} interval "
          f"({ci.lo:.6g}, {ci.hi:.6g})")
    if args.out:
        write_rows(os.path.join(_outdir(args), "interval.csv"),
                   [{"index": args.index, "level": args.level, "lo": ci.lo, "hi": ci.hi,
                     "estimate": ci.estimate}])
    return 0


def load_regression_csv(path, response, covariates=None, intercept=True):
    """Read a headed CSV into ``(Z, names)`` where ``Z`` rows are ``(y, x)``.

    Covariates are standardized; ``names`` labels the columns of ``x``.

    Rows with missing or non-numeric entries in the used columns are dropped.
    """
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        names = reader.fieldnames or []
        if response not in names:
            raise ValueError(f"response column {response!r} not in {names}")
        cov = list(covariates) if covariates else [c for c in names if c != response]
        missing = [c for c in cov if c not in names]
        if missing:
            raise ValueError(f"unknown covariate columns {missing}")
        rows = []
        for rec in reader:
            try:
                rows.append([float(rec[response])] + [float(rec[c]) for c in cov])
            except (TypeError, ValueError):
                continue
    Z = np.array(rows, dtype=float)
    if Z.shape[0] == 0:
        raise ValueError("no complete numeric rows")
    X = Z[:, 1:]
    sd = X.std(axis=0)
    X = (X - X.mean(axis=0)) / np.where(sd > 0, sd, 1.0)
    if intercept:
        X = np.column_stack([np.ones(len(X)), X])
        cov = ["(intercept)"] + cov
    return np.column_stack([Z[:, 0], X]), cov


def cmd_ingest(args):
    covs = args.covariates.split(",") if args.covariates else None
    Z, names = load_regression_csv(args.csv, args.response, covs, not args.no_intercept)
    rng = np.random.default_rng(args.seed)
    Z = Z[rng.permutation(len(Z))]
    usable = (len(Z) // args.K) * args.K
    node_data = np.split(Z[:usable], args.K)
    d = Z.shape[1] - 1
    ef = by_name(args.family, d=d)
    graph = gen_erdos_renyi(args.K, args.p_g, seed=args.seed)
    _, cfg = build({}, {})
    theta_hat = ef.estimate(np.vstack(node_data))
    rows = []
    for j, name in enumerate(names):
        ci = profile_interval(ef, node_data, j, args.level, solver=args.algo, graph=graph,
                              config=cfg, estimate=theta_hat)
        rows.append({"covariate": name, "estimate": ci.estimate, "lo": ci.lo, "hi": ci.hi})
        print(f"{name:>16}  {ci.estimate: .5f}  ({ci.lo: .5f}, {ci.hi: .5f})")
    if args.out:
        write_rows(os.path.join(_outdir(args), "intervals.csv"), rows)
    return 0


COMMANDS = {"solve": cmd_solve, "coverage": cmd_coverage, "iterations": cmd_iterations,
            "rho-sweep": cmd_rho, "graph": cmd_graph, "interval": cmd_interval,
            "ingest-csv": cmd_ingest}


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, GraphError, EstimatingFunctionError, ValueError, OSError) as exc:
        print(f"netel {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
