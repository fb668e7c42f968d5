"""Monte Carlo experiments: coverage, iteration counts per topology, rho sweep."""
from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..admm import SolverConfig
from ..chisq import chisq_quantile
from ..elcore import ConvergenceError, moment_blocks, pooled_statistic, profile_interval
from ..graph import Graph, complete_graph, gen_erdos_renyi, spanning_tree
from ..maom import run_maom_blocks
from ..pcm import run_pcm_blocks
from .data import ExperimentSpec, estimating_function, generate_data, replication_seed, true_theta

log = logging.getLogger(__name__)

METHODS = ("pcm", "maom", "reference")
RUNNERS = {"pcm": run_pcm_blocks, "maom": run_maom_blocks}


def build_graph(spec: ExperimentSpec, seed) -> Graph:
    if spec.graph == "complete":
        return complete_graph(spec.K)
    if spec.graph == "tree":
        base = complete_graph(spec.K) if spec.tree_p >= 1.0 else gen_erdos_renyi(spec.K, spec.tree_p, seed)
        return spanning_tree(base)
    return gen_erdos_renyi(spec.K, spec.p_g, seed)


def parse_topology(name: str):
    """``"tree"``, ``"complete"`` or ``"er:<p>"`` to ``(graph model, p)``."""
    if name in ("tree", "complete"):
        return name, 1.0
    if name.startswith("er:"):
        return "er", float(name[3:])
    raise ValueError(f"unknown topology {name!r}; use tree, complete or er:<p>")


def solver_config(spec: ExperimentSpec, base: SolverConfig | None = None, **kw) -> SolverConfig:
    base = SolverConfig(record_statistic=False) if base is None else base
    opts = dict(base.__dict__)
    opts["eta_rule"] = spec.eta_rule
    if spec.rho_mult != 1.0 and base.rho is None:
        opts["rho"] = spec.rho_mult * spec.n
    opts.update(kw)
    return SolverConfig(**opts)


def _streams(spec, rep):
    data_ss, graph_ss = replication_seed(spec.seed, rep).spawn(2)
    return np.random.default_rng(data_ss), graph_ss


def _map(fn, jobs, workers):
    # pool.map keeps job order, so output does not depend on scheduling
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            return list(pool.map(fn, jobs))
    return [fn(j) for j in jobs]


def statistic(method, graph, blocks, config):
    """EL ratio statistic from one method; ``(value, iterations, converged)``."""
    if method == "reference":
        stat, _ = pooled_statistic(np.vstack(blocks), config.log_eps)
        return stat, 0, True
    _, report = RUNNERS[method](graph, blocks, config)
    return report.final_statistic, report.iterations, report.converged


@dataclass
class CoverageResult:
    rows: list
    statistics: dict = field(default_factory=dict)   # method -> array over reps (nan if failed)
    failures: dict = field(default_factory=dict)     # method -> failed replication indices

    def to_csv(self, path) -> None:
        write_rows(path, self.rows, ["method", "level", "coverage", "mean_length", "n_failed"])


def _coverage_rep(args):
    spec, rep, methods, interval_methods, config = args
    rng, graph_ss = _streams(spec, rep)
    data = generate_data(spec, rng)
    graph = build_graph(spec, graph_ss)
    ef = estimating_function(spec)
    theta0 = true_theta(spec)
    blocks = moment_blocks(data, ef, theta0)
    out = {}
    for m in methods:
        try:
            stat, _, ok = statistic(m, graph, blocks, config)
            if not ok:
                raise ConvergenceError(f"{m} hit max_iter")
        except (ConvergenceError, FloatingPointError, np.linalg.LinAlgError) as exc:
            log.warning("replication %d, %s: %s", rep, m, exc)
            out[m] = (math.nan, {})
            continue
        lengths = {}
        if m in interval_methods and ef.p == 1:
            for lv in spec.levels:
                ci = profile_interval(ef, data, 0, lv, solver=m, graph=graph, config=config)
                lengths[lv] = ci.length if ci.lo_found and ci.hi_found else math.nan
        out[m] = (stat, lengths)
    return out


def experiment_coverage(spec: ExperimentSpec, methods=METHODS, interval_methods=("reference",),
                        config: SolverConfig | None = None, workers: int = 1) -> CoverageResult:
    """Test ``theta_0`` in every replication and tabulate empirical coverage.

    Coverage at level ``a`` is the fraction of replications whose statistic is
    at most the ``chi2_r`` quantile ``a``. For scalar parameters, profile
    intervals are computed with the methods in ``interval_methods`` and their
    mean length is reported (each decentralized interval costs dozens of full
    solver runs, so only the pooled reference is on by default). A replication that
    fails for one method is counted in ``n_failed`` and left out of that
    method's averages.
    """
    methods = tuple(methods)
    interval_methods = () if interval_methods is None else tuple(interval_methods)
    config = solver_config(spec, config)
    jobs = [(spec, rep, methods, interval_methods, config) for rep in range(spec.reps)]
    results = _map(_coverage_rep, jobs, workers)

    r = estimating_function(spec).r
    res = CoverageResult([])
    for m in methods:
        stats = np.array([out[m][0] for out in results])
        res.statistics[m] = stats
        failed = [i for i, v in enumerate(stats) if not math.isfinite(v)]
        res.failures[m] = failed
        ok = np.isfinite(stats)
        for lv in spec.levels:
            thr = chisq_quantile(r, lv)
            cover = float(np.mean(stats[ok] <= thr)) if ok.any() else math.nan
            lens = [out[m][1].get(lv, math.nan) for out in results]
            lens = [x for x in lens if math.isfinite(x)]
            res.rows.append({"method": m, "level": lv, "coverage": cover,
                             "mean_length": float(np.mean(lens)) if lens else math.nan,
                             "n_failed": len(failed)})
    return res


def _iterations_rep(args):
    spec, rep, algos, config = args
    rng, graph_ss = _streams(spec, rep)
    data = generate_data(spec, rng)
    graph = build_graph(spec, graph_ss)
    blocks = moment_blocks(data, estimating_function(spec), true_theta(spec))
    out = {}
    for a in algos:
        _, report = RUNNERS[a](graph, blocks, config)
        out[a] = (report.iterations, report.wall_time, report.median_iter_time(), report.converged)
    return out


def experiment_iterations(base: ExperimentSpec, topologies=("tree", "er:0.1", "er:0.3", "complete"),
                          grid=((3, 1000),), algos=("pcm", "maom"),
                          config: SolverConfig | None = None, workers: int = 1):
    """Mean iterations and wall time per topology, ``(d, n)`` pair and algorithm.

    Data are drawn at the true parameter. Rows carry ``topology, d, n, algo,
    mean_iters, mean_time_s, median_iter_time_s, converged_frac``; the median
    per-iteration time is the scheduler-robust comparison.
    """
    rows = []
    for d, n in grid:
        for topo in topologies:
            model, p = parse_topology(topo)
            spec = base.with_(d=d, n=n, graph=model, p_g=p)
            cfg = solver_config(spec, config)
            jobs = [(spec, rep, tuple(algos), cfg) for rep in range(spec.reps)]
            results = _map(_iterations_rep, jobs, workers)
            for a in algos:
                its, wall, med, conv = zip(*(res[a] for res in results))
                rows.append({"topology": topo, "d": d, "n": n, "algo": a,
                             "mean_iters": float(np.mean(its)), "mean_time_s": float(np.mean(wall)),
                             "median_iter_time_s": float(np.median(med)),
                             "converged_frac": float(np.mean(conv))})
    return rows


def experiment_rho_sweep(spec: ExperimentSpec, multipliers=(0.01, 0.1, 1.0, 10.0, 100.0),
                         algos=("pcm", "maom"), config: SolverConfig | None = None, workers: int = 1):
    """Mean iterations to convergence as ``rho = m n`` varies.

    Rows carry ``rho, algo, mean_iters, converged_frac``. Runs that hit
    ``max_iter`` count with ``max_iter`` iterations.
    """
    rows = []
    for m in multipliers:
        cfg = solver_config(spec, config, rho=m * spec.n)
        jobs = [(spec, rep, tuple(algos), cfg) for rep in range(spec.reps)]
        results = _map(_iterations_rep, jobs, workers)
        for a in algos:
            its = [res[a][0] for res in results]
            conv = [res[a][3] for res in results]
            rows.append({"rho": m * spec.n, "algo": a, "mean_iters": float(np.mean(its)),
                         "converged_frac": float(np.mean(conv))})
    return rows


def write_rows(path, rows, fields=None) -> None:
    """CSV with floats written by ``repr`` so identical runs give identical bytes."""
    fields = list(rows[0].keys()) if fields is None else fields
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for row in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in row.items()})
