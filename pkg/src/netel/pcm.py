"""Pairwise Copy Method.

ADMM on the reformulation where every edge ``(i, j)`` carries a copy ``c_ij`` of
``lam_i`` and a copy ``c_ji`` of ``lam_j``, penalised by ``eta ||c_ij - c_ji||``.
Each iteration updates the copies (closed form), then the node multipliers
(a small Newton solve per node), then the duals.

Copy/dual arrays have ``2M`` rows: rows ``0..M-1`` hold the lower endpoint's
side of each edge, rows ``M..2M-1`` the upper endpoint's side, matching the
stacked incidence matrix ``A_LR = [A_L; A_R]``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .admm import RunReport, SolverConfig, block_sum, consensus_gap, node_sizes, tolerances
from .elcore import ConvergenceError, el_statistic, moment_blocks
from .graph import Graph, incidence


@dataclass
class PCMState:
    Lam: np.ndarray
    C: np.ndarray
    V: np.ndarray
    t: int = 0
    r1_norm: float = math.inf
    s1_norm: float = math.inf
    converged: bool = False


def pcm_edge_update(lam_i, lam_j, v_ij, v_ji, rho, eta):
    """Closed-form minimiser of the copy subproblem for one edge.

    Returns ``(c_ij, c_ji)``: convex combinations of ``a = lam_i + v_ij/rho`` and
    ``b = lam_j + v_ji/rho`` with weight
    ``omega = max(1 - eta/||rho lam_i - rho lam_j + v_ij - v_ji||, 1/2)``
    (``omega = 1/2`` when that norm is zero).
    """
    row = lambda x: np.asarray(x, dtype=float).reshape(1, -1)
    c_l, c_r = kernels.pcm_edges(row(lam_i), row(lam_j), row(v_ij), row(v_ji),
                                 float(rho), float(eta))
    return c_l[0], c_r[0]


def pcm_node_update(G, lam_prev, v_blocks, c_blocks, rho, eps, inner_tol=1e-10,
                    inner_max_iter=50):
    """Root of ``grad l_i(lam) + sum v + rho sum (lam - c) = 0`` by damped Newton.

    ``v_blocks``/``c_blocks`` are node ``i``'s duals and copies on its incident
    edges, in ascending edge order. Warm-started at ``lam_prev``. Returns
    ``(lam, newton_iterations)``.
    """
    lam_prev = np.asarray(lam_prev, dtype=float)
    r = lam_prev.shape[0]
    deg = len(v_blocks)
    vsum = block_sum(v_blocks, r)
    csum = block_sum(c_blocks, r)
    tol = inner_tol * (1.0 + rho * deg)
    lam, it, gnorm, ok = kernels.pcm_node_solve(G, lam_prev, vsum, csum, float(deg),
                                                float(rho), float(eps), tol, int(inner_max_iter))
    if not ok:
        raise ConvergenceError(
            f"PCM node Newton hit its cap of {inner_max_iter} iterations (|grad| = {gnorm:.3g})")
    return lam, it


def pcm_dual_update(V, Lam, C, rho, edges):
    """``v += rho (lam - c)`` on both sides of every edge."""
    M = len(edges)
    src = np.array([i for i, _ in edges], dtype=int) - 1
    dst = np.array([j for _, j in edges], dtype=int) - 1
    out = np.empty_like(V)
    out[:M] = V[:M] + rho * (Lam[src] - C[:M])
    out[M:] = V[M:] + rho * (Lam[dst] - C[M:])
    return out


def own_rows(graph: Graph):
    """For each node, the copy/dual rows it owns, in ascending edge order."""
    M = graph.M
    rows = [[] for _ in range(graph.K)]
    for l, (i, j) in enumerate(graph.edges):
        rows[i - 1].append(l)
        rows[j - 1].append(M + l)
    return [np.array(rw, dtype=int) for rw in rows]


def pcm_residuals(A_LR, Lam, C, V_prev, V, rho):
    """Primal/dual residual norms and the stopping-scale quantities.

    Returns ``(r_norm, s_norm, ||A_LR Lam||, ||C||, ||A_LR' V||)`` with
    ``r = A_LR Lam - C`` and ``s = rho A_LR'(V_prev - V)``.
    """
    ALR_Lam = A_LR @ Lam
    r = ALR_Lam - C
    s = rho * (A_LR.T @ (V_prev - V))
    return (float(np.linalg.norm(r)), float(np.linalg.norm(s)),
            float(np.linalg.norm(ALR_Lam)), float(np.linalg.norm(C)),
            float(np.linalg.norm(A_LR.T @ V)))


class PCMObserver:
    """Global residual bookkeeping; needs every node's state, so it is not a
    decentralized computation (reports mark these fields observer-only)."""

    def __init__(self, graph, blocks, config, resolved):
        self.graph = graph
        self.blocks = blocks
        self.config = config
        self.res = resolved
        self.A_LR = incidence(graph).A_LR
        K, r = len(blocks), blocks[0].shape[1]
        self.n_primal = 2 * graph.M * r
        self.n_dual = K * r

    def check(self, report, Lam, C_prev, C, V_prev, V):
        rho = self.res.rho
        r_norm, s_norm, alam, cn, atv = pcm_residuals(self.A_LR, Lam, C, V_prev, V, rho)
        s_tb = float(np.linalg.norm(rho * (self.A_LR.T @ (C - C_prev))))
        eps_pri, eps_dual = tolerances(self.config.eps_abs, self.config.eps_rel,
                                       self.n_primal, self.n_dual, max(alam, cn), atv)
        report.r_norm.append(r_norm)
        report.s_norm.append(s_norm)
        report.s_textbook.append(s_tb)
        report.eps_pri.append(eps_pri)
        report.eps_dual.append(eps_dual)
        report.consensus_gap.append(consensus_gap(Lam, self.graph.edges))
        if self.config.record_statistic:
            report.statistic.append(el_statistic(Lam, self.blocks, self.res.log_eps))
        if self.config.keep_history:
            report.history.append(Lam.copy())
        return r_norm <= eps_pri and s_norm <= eps_dual, r_norm, s_norm


def _setup(graph, blocks, config):
    config = SolverConfig() if config is None else config
    if len(blocks) != graph.K:
        raise ValueError(f"got {len(blocks)} data blocks for a graph with K={graph.K}")
    r = blocks[0].shape[1]
    if any(b.ndim != 2 or b.shape[1] != r for b in blocks):
        raise ValueError("all moment blocks must be 2-D with the same number of columns")
    _, N, n = node_sizes(blocks)
    return config, config.resolve(graph.K, n, N), r


def run_pcm_blocks(graph: Graph, blocks, config: SolverConfig | None = None):
    """Run PCM on precomputed estimating-function blocks (one ``n_i x r`` per node)."""
    blocks = [np.ascontiguousarray(b, dtype=float) for b in blocks]
    config, res, r = _setup(graph, blocks, config)
    K, M = graph.K, graph.M
    rho, eta, eps = res.rho, res.eta, res.log_eps
    src = np.array([i for i, _ in graph.edges], dtype=int) - 1
    dst = np.array([j for _, j in graph.edges], dtype=int) - 1
    rows = own_rows(graph)
    observer = PCMObserver(graph, blocks, config, res)

    state = PCMState(np.zeros((K, r)), np.zeros((2 * M, r)), np.zeros((2 * M, r)))
    report = RunReport("pcm", rho=rho, eta=eta)
    start = time.perf_counter()
    for t in range(config.max_iter):
        tick = time.perf_counter()
        Lam, C_prev, V_prev = state.Lam, state.C, state.V
        c_l, c_r = kernels.pcm_edges(Lam[src], Lam[dst], V_prev[:M], V_prev[M:], rho, eta)
        C = np.vstack([c_l, c_r])
        new_Lam = np.empty_like(Lam)
        inner = 0
        for k in range(K):
            lam, it = pcm_node_update(blocks[k], Lam[k], V_prev[rows[k]], C[rows[k]], rho, eps,
                                      config.inner_tol, config.inner_max_iter)
            new_Lam[k] = lam
            inner += it
        V = pcm_dual_update(V_prev, new_Lam, C, rho, graph.edges)
        report.iter_time.append(time.perf_counter() - tick)
        report.inner_iterations.append(inner)
        done, r_norm, s_norm = observer.check(report, new_Lam, C_prev, C, V_prev, V)
        state = PCMState(new_Lam, C, V, t + 1, r_norm, s_norm, done)
        if done:
            break
    report.iterations = state.t
    report.converged = state.converged
    report.wall_time = time.perf_counter() - start
    report.final_statistic = el_statistic(state.Lam, blocks, eps)
    return state, report


def run_pcm(graph: Graph, node_data, ef, theta, config: SolverConfig | None = None):
    """Run PCM from zero initial values until both residuals meet tolerance.

    Returns ``(PCMState, RunReport)``; ``state.converged`` is False when
    ``max_iter`` was reached.
    """
    return run_pcm_blocks(graph, moment_blocks(node_data, ef, theta), config)
