"""Modified Approximation Objective Method.

ADMM on the difference reformulation ``z_e = lam_i - lam_j`` for every edge
``e = (i, j)``, penalised by ``eta ||z_e||``. Each iteration soft-thresholds the
differences, then replaces every node's EL objective by its second-order
expansion at the current point plus the proximal term with
``Q = D - rho L (x) I_r``. The proximal term cancels the coupling between
neighbours, so the multiplier step is one ``r x r`` solve per node.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import kernels
from .admm import RunReport, SolverConfig, block_sum, consensus_gap, node_sizes, tolerances
from .elcore import el_statistic, moment_blocks
from .graph import Graph, incidence, spanning_tree


@dataclass
class MAOMState:
    Lam: np.ndarray
    Z: np.ndarray
    T: np.ndarray
    t: int = 0
    r2_norm: float = math.inf
    s2_norm: float = math.inf
    converged: bool = False


class ProxMatrix:
    """Diagonal scalars ``d_i = 2 rho |N_i| + 1`` of the proximal matrix.

    ``Q = D - rho L`` is only formed densely on request, for checking.
    """

    def __init__(self, graph: Graph, rho: float):
        self.graph = graph
        self.rho = float(rho)
        self.d = 2.0 * self.rho * np.asarray(graph.degrees(), dtype=float) + 1.0

    def dense(self) -> np.ndarray:
        """``D - rho L`` for one coordinate (the full matrix is this Kronecker ``I_r``)."""
        return np.diag(self.d) - self.rho * incidence(self.graph).L

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.dense())[0])


def soft_threshold(h, t):
    """Groupwise soft-thresholding ``(1 - t/||h||)_+ h``; zero when ``||h|| <= t``.

    >>> soft_threshold([3.0, 4.0], 2.5)
    array([1.5, 2. ])
    """
    if t < 0:
        raise ValueError("threshold must be non-negative")
    h = np.asarray(h, dtype=float)
    return kernels.soft_threshold_rows(h.reshape(1, -1), float(t))[0]


def maom_z_update(lam_i, lam_j, t_ij, rho, eta):
    """``z = S(lam_i - lam_j + t/rho, eta/rho)`` for one edge."""
    row = lambda x: np.asarray(x, dtype=float).reshape(1, -1)
    return kernels.maom_edges(row(lam_i), row(lam_j), row(t_ij), float(rho), float(eta))[0]


def edge_terms(Z, T, rho):
    """``rho z - t`` per edge; node ``i`` adds it for edges it leads and subtracts otherwise."""
    return rho * Z - T


def maom_node_update(G, lam, nb_lams, signed_terms, rho, eps):
    """One closed-form multiplier step at a node.

    ``nb_lams`` are the neighbours' current multipliers and ``signed_terms`` the
    incident ``+-(rho z - t)`` blocks, both in ascending edge order (sequences
    of length-``r`` blocks or ``(deg, r)`` arrays). Solves
    ``[H + (2 rho d + 1) I] lam' = [H + (rho d + 1) I] lam + rho sum nb
    + sum terms - grad`` with ``H``, ``grad`` the local Hessian and gradient at
    ``lam`` and ``d`` the degree.
    """
    lam = np.asarray(lam, dtype=float)
    r = lam.shape[0]
    deg = len(nb_lams)
    nb_sum = block_sum(nb_lams, r)
    edge_sum = block_sum(signed_terms, r)
    new, _ = kernels.maom_node_solve(G, lam, nb_sum, edge_sum, float(deg), float(rho), float(eps))
    return new


def maom_dual_update(T, Lam, Z, rho, edges):
    """``t_e += rho (lam_i - lam_j - z_e)`` for every edge ``e = (i, j)``."""
    src = np.array([i for i, _ in edges], dtype=int) - 1
    dst = np.array([j for _, j in edges], dtype=int) - 1
    return T + rho * (Lam[src] - Lam[dst] - Z)


def node_incidence(graph: Graph):
    """Per node, ``[(edge index, neighbour index, sign)]`` in ascending edge order (0-based)."""
    out = [[] for _ in range(graph.K)]
    for l, (i, j) in enumerate(graph.edges):
        out[i - 1].append((l, j - 1, 1.0))
        out[j - 1].append((l, i - 1, -1.0))
    return out


def node_index(graph: Graph):
    """Per node, ``(edge rows, neighbour rows, signs)`` arrays in ascending edge order."""
    out = []
    for lst in node_incidence(graph):
        out.append((np.array([l for l, _, _ in lst], dtype=int),
                    np.array([nb for _, nb, _ in lst], dtype=int),
                    np.array([s for _, _, s in lst], dtype=float)[:, None]))
    return out


def maom_residuals(A, Lam, Z, T_prev, T, rho):
    """``(||r||, ||s||, ||A Lam||, ||Z||, ||A' T||)`` with ``r = A Lam - Z`` and
    ``s = rho A'(T_prev - T)``."""
    A_Lam = A @ Lam
    r = A_Lam - Z
    s = rho * (A.T @ (T_prev - T))
    return (float(np.linalg.norm(r)), float(np.linalg.norm(s)),
            float(np.linalg.norm(A_Lam)), float(np.linalg.norm(Z)),
            float(np.linalg.norm(A.T @ T)))


class MAOMObserver:
    """Global residual bookkeeping (observer-only, see ``RunReport.observer_only``).

    Besides ``r`` and ``s`` the stop test requires the proximal residual
    ``||Q (Lam_new - Lam_old)||`` with ``Q = D - rho L`` to meet the dual
    tolerance. The node step is a linearised one, so ``r = s = 0`` alone does not
    certify optimality. With identical data on every node the iterates stay in
    exact consensus from the first step and ``r``, ``s`` vanish while the
    multipliers are still moving.
    """

    def __init__(self, graph, blocks, config, resolved):
        self.graph = graph
        self.blocks = blocks
        self.config = config
        self.res = resolved
        self.A = incidence(graph).A
        self.Q = ProxMatrix(graph, resolved.rho).dense()
        r = blocks[0].shape[1]
        self.n_primal = graph.M * r
        self.n_dual = graph.K * r

    def check(self, report, Lam_prev, Lam, Z_prev, Z, T_prev, T):
        rho = self.res.rho
        r_norm, s_norm, alam, zn, atn = maom_residuals(self.A, Lam, Z, T_prev, T, rho)
        s_tb = float(np.linalg.norm(rho * (self.A.T @ (Z - Z_prev))))
        eps_pri, eps_dual = tolerances(self.config.eps_abs, self.config.eps_rel,
                                       self.n_primal, self.n_dual, max(alam, zn), atn)
        report.r_norm.append(r_norm)
        report.s_norm.append(s_norm)
        report.s_textbook.append(s_tb)
        s_prox = float(np.linalg.norm(self.Q @ (Lam - Lam_prev)))
        report.s_prox.append(s_prox)
        report.eps_pri.append(eps_pri)
        report.eps_dual.append(eps_dual)
        report.consensus_gap.append(consensus_gap(Lam, self.graph.edges))
        if self.config.record_statistic:
            report.statistic.append(el_statistic(Lam, self.blocks, self.res.log_eps))
        if self.config.keep_history:
            report.history.append(Lam.copy())
        done = r_norm <= eps_pri and s_norm <= eps_dual and s_prox <= eps_dual
        return done, r_norm, s_norm


def run_maom_blocks(graph: Graph, blocks, config: SolverConfig | None = None,
                    use_spanning_tree: bool = False):
    """Run MAOM on precomputed estimating-function blocks."""
    config = SolverConfig() if config is None else config
    blocks = [np.ascontiguousarray(b, dtype=float) for b in blocks]
    if len(blocks) != graph.K:
        raise ValueError(f"got {len(blocks)} data blocks for a graph with K={graph.K}")
    r = blocks[0].shape[1]
    if any(b.ndim != 2 or b.shape[1] != r for b in blocks):
        raise ValueError("all moment blocks must be 2-D with the same number of columns")
    if use_spanning_tree:
        graph = spanning_tree(graph)
    _, N, n = node_sizes(blocks)
    res = config.resolve(graph.K, n, N)
    K, M = graph.K, graph.M
    rho, eta, eps = res.rho, res.eta, res.log_eps
    src = np.array([i for i, _ in graph.edges], dtype=int) - 1
    dst = np.array([j for _, j in graph.edges], dtype=int) - 1
    idx = node_index(graph)
    observer = MAOMObserver(graph, blocks, config, res)

    state = MAOMState(np.zeros((K, r)), np.zeros((M, r)), np.zeros((M, r)))
    report = RunReport("maom", rho=rho, eta=eta)
    start = time.perf_counter()
    for t in range(config.max_iter):
        tick = time.perf_counter()
        Lam, Z_prev, T_prev = state.Lam, state.Z, state.T
        Z = kernels.maom_edges(Lam[src], Lam[dst], T_prev, rho, eta)
        W = edge_terms(Z, T_prev, rho)
        new_Lam = np.empty_like(Lam)
        for k, (ls, nbs, signs) in enumerate(idx):
            new_Lam[k] = maom_node_update(blocks[k], Lam[k], Lam[nbs], signs * W[ls], rho, eps)
        T = maom_dual_update(T_prev, new_Lam, Z, rho, graph.edges)
        report.iter_time.append(time.perf_counter() - tick)
        done, r_norm, s_norm = observer.check(report, Lam, new_Lam, Z_prev, Z, T_prev, T)
        state = MAOMState(new_Lam, Z, T, t + 1, r_norm, s_norm, done)
        if done:
            break
    report.iterations = state.t
    report.converged = state.converged
    report.wall_time = time.perf_counter() - start
    report.final_statistic = el_statistic(state.Lam, blocks, eps)
    return state, report


def run_maom(graph: Graph, node_data, ef, theta, config: SolverConfig | None = None,
             use_spanning_tree: bool = False):
    """Run MAOM from zero initial values until both residuals meet tolerance.

    With ``use_spanning_tree`` the run uses ``spanning_tree(graph)`` instead of
    the full graph. Returns ``(MAOMState, RunReport)``.
    """
    return run_maom_blocks(graph, moment_blocks(node_data, ef, theta), config, use_spanning_tree)
