"""Compare the compiled kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--n 1000] [--r 3] [--repeat 200]

Prints the median time per call for each kernel and backend, then one full
PCM and MAOM run per backend. Results also check that both backends agree.
"""
import argparse
import os
import statistics
import subprocess
import sys
import time

import numpy as np

from netel.kernels import backends


def timed(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def kernel_table(n, r, repeat):
    rng = np.random.default_rng(0)
    G = rng.standard_normal((n, r))
    lam = 0.01 * rng.standard_normal(r)
    eps = 1.0 / (20 * n)
    M = 200
    lam_l, lam_r = rng.standard_normal((M, r)), rng.standard_normal((M, r))
    v_l, v_r = rng.standard_normal((M, r)), rng.standard_normal((M, r))
    cases = {
        "local_terms": lambda k: k.local_terms(G, lam, eps),
        "pcm_node_solve": lambda k: k.pcm_node_solve(G, lam, np.zeros(r), 3 * lam, 3.0, float(n),
                                                     eps, 1e-13 * (1 + 3 * n), 50),
        "maom_node_solve": lambda k: k.maom_node_solve(G, lam, 3 * lam, np.zeros(r), 3.0, float(n), eps),
        "pcm_edges": lambda k: k.pcm_edges(lam_l, lam_r, v_l, v_r, float(n), 1e3),
        "maom_edges": lambda k: k.maom_edges(lam_l, lam_r, v_l, float(n), 1e3),
    }
    impls = backends()
    print(f"kernel timings, n={n}, r={r} (median of {repeat} calls, microseconds)")
    print(f"{'kernel':<18}" + "".join(f"{name:>12}" for name in impls) + f"{'speedup':>10}")
    for label, call in cases.items():
        cols = {name: timed(lambda: call(mod), repeat) for name, mod in impls.items()}
        speed = cols["python"] / cols["compiled"] if "compiled" in cols else float("nan")
        print(f"{label:<18}" + "".join(f"{1e6 * t:>12.1f}" for t in cols.values()) + f"{speed:>10.1f}x")
        if "compiled" in impls:
            a, b = call(impls["python"]), call(impls["compiled"])
            a, b = (a, b) if isinstance(a, tuple) else ((a,), (b,))
            for x, y in zip(a, b):
                assert np.allclose(x, y, rtol=1e-9, atol=1e-12), label


SOLVER_SNIPPET = """
import time, numpy as np
from netel import kernels
from netel.harness.data import ExperimentSpec, generate_data, estimating_function, true_theta
from netel.harness.experiments import build_graph
from netel.elcore import moment_blocks
from netel.pcm import run_pcm_blocks
from netel.maom import run_maom_blocks
from netel.admm import SolverConfig
spec = ExperimentSpec(family="mean", d=3, K=20, n=1000, seed=1)
B = moment_blocks(generate_data(spec), estimating_function(spec), true_theta(spec))
g = build_graph(spec, 1)
for name, run in (("pcm", run_pcm_blocks), ("maom", run_maom_blocks)):
    _, rep = run(g, B, SolverConfig(record_statistic=False))
    print(f"{kernels.BACKEND:<9} {name:<5} {rep.iterations:>5} iterations "
          f"{1e3 * rep.median_iter_time():8.3f} ms/iteration")
"""


def solver_table():
    print("\nfull solver runs (K=20, n=1000, mean, G(20, 0.3))")
    for pure in (False, True):
        env = dict(os.environ)
        env.pop("NETEL_PURE_PYTHON", None)
        if pure:
            env["NETEL_PURE_PYTHON"] = "1"
        out = subprocess.run([sys.executable, "-c", SOLVER_SNIPPET], env=env,
                             capture_output=True, text=True, check=True)
        print(out.stdout.rstrip())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=1000)
    ap.add_argument("--r", type=int, default=3)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if "compiled" not in backends():
        print("compiled extension not built; only the numpy fallback is available")
    kernel_table(args.n, args.r, args.repeat)
    solver_table()


if __name__ == "__main__":
    main()
