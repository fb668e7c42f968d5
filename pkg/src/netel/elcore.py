"""Empirical-likelihood numerics: pseudo-logarithm, per-node objective, pooled
reference multiplier, the distributed EL ratio statistic and profile intervals."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .chisq import chisq_quantile

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """An iterative solver stopped before meeting its tolerance."""


class NonFiniteError(FloatingPointError):
    """Objective accumulation produced inf/nan."""


def log_star(z, eps):
    """Owen's pseudo-logarithm with switch point ``eps``.

    Returns ``(value, first derivative, second derivative)``. Above ``eps`` this is
    ``log z``; below, the quadratic ``log(eps) - 1.5 + 2z/eps - z^2/(2 eps^2)``,
    which matches ``log`` to second order at ``eps``.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    val, d1, d2 = kernels.log_star_terms(np.asarray(z, dtype=float), float(eps))
    if np.ndim(z) == 0:
        return float(val), float(d1), float(d2)
    return val, d1, d2


def default_eps(N: int) -> float:
    return 1.0 / N


def local_objective(G, lam, eps):
    """``l_i(lam) = -2 sum_j log*(1 + lam'g_j)`` with gradient and Hessian.

    ``G`` holds the node's estimating-function values, one row per sample.
    """
    val, grad, hess = kernels.local_terms(G, np.asarray(lam, dtype=float), float(eps))
    if not (math.isfinite(val) and np.all(np.isfinite(grad)) and np.all(np.isfinite(hess))):
        raise NonFiniteError("non-finite EL objective; theta is likely pathological")
    return val, grad, hess


def moment_blocks(node_data, ef, theta):
    """Evaluate ``ef`` on every node's observations at ``theta``."""
    return [np.ascontiguousarray(ef(X, theta)) for X in node_data]


def solve_reference(G, eps=None, tol=None, max_iter=200):
    """Pooled multiplier ``argmin_lam l(lam)`` by damped Newton from zero.

    ``G`` is the full ``N x r`` matrix of estimating-function values (all nodes
    stacked). Stops when ``||grad|| <= tol`` (default ``1e-10 * N``).
    """
    G = np.ascontiguousarray(G, dtype=float)
    N, r = G.shape
    eps = default_eps(N) if eps is None else eps
    tol = 1e-10 * N if tol is None else tol
    lam = np.zeros(r)
    val, grad, hess = local_objective(G, lam, eps)
    for it in range(max_iter):
        gnorm = float(np.linalg.norm(grad))
        if gnorm <= tol:
            return lam
        try:
            step = np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            raise ConvergenceError("singular Hessian; second-moment matrix is degenerate") from None
        slack = 1e-12 * (1.0 + abs(val))
        t = 1.0
        while True:
            cand = lam - t * step
            cval, cgrad, chess = kernels.local_terms(G, cand, eps)
            if (math.isfinite(cval) and cval <= val + slack) or t < 1e-14:
                break
            t *= 0.5
        lam, val, grad, hess = cand, cval, cgrad, chess
    gnorm = float(np.linalg.norm(grad))
    if gnorm <= tol:
        return lam
    raise ConvergenceError(
        f"reference Newton did not converge in {max_iter} iterations (|grad| = {gnorm:.3g})")


def el_statistic(Lam, blocks, eps):
    """Distributed EL ratio statistic ``-sum_i l_i(lam_i)``."""
    Lam = np.asarray(Lam, dtype=float)
    total = 0.0
    for lam, G in zip(Lam, blocks):
        total += kernels.local_value(G, lam, eps)
    return -total


def pooled_statistic(G, eps=None):
    """``-l(lam*)`` for the pooled data, and ``lam*``."""
    G = np.ascontiguousarray(G, dtype=float)
    eps = default_eps(G.shape[0]) if eps is None else eps
    lam = solve_reference(G, eps)
    return -kernels.local_value(G, lam, eps), lam


@dataclass
class ProfileInterval:
    lo: float
    hi: float
    estimate: float
    threshold: float
    lo_found: bool = True
    hi_found: bool = True

    @property
    def length(self) -> float:
        return self.hi - self.lo


def statistic_at(theta, node_data, ef, graph=None, solver="reference", config=None):
    """EL ratio statistic at ``theta`` computed with the chosen solver.

    Returns ``inf`` when the multiplier problem has no minimiser (zero outside
    the convex hull of the estimating-function values).
    """
    blocks = moment_blocks(node_data, ef, theta)
    N = sum(b.shape[0] for b in blocks)
    if solver == "reference":
        eps = config.log_eps if config is not None and config.log_eps else default_eps(N)
        try:
            stat, _ = pooled_statistic(np.vstack(blocks), eps)
        except ConvergenceError:
            return math.inf
        return stat
    if graph is None:
        raise ValueError(f"solver {solver!r} needs a graph")
    from .maom import run_maom_blocks
    from .pcm import run_pcm_blocks

    runner = {"pcm": run_pcm_blocks, "maom": run_maom_blocks}.get(solver)
    if runner is None:
        raise ValueError(f"unknown solver {solver!r}")
    state, report = runner(graph, blocks, config)
    if not report.converged or not math.isfinite(report.final_statistic):
        return math.inf
    return report.final_statistic


def profile_interval(ef, node_data, index=0, level=0.95, solver="reference", graph=None,
                     config=None, estimate=None, step=None, max_expand=60, xtol=None):
    """Confidence interval for one component of theta by inverting the EL ratio test.

    Other components are held at the pooled point estimate. Each endpoint is
    bracketed by stepping outward from the estimate (doubling the step) until the
    statistic exceeds the chi-squared(1) critical value, then refined by bisection.
    An endpoint whose bracket is not found within ``max_expand`` doublings is
    reported with ``*_found = False`` and set to the last scanned point.
    """
    pooled = np.vstack([np.asarray(X, dtype=float) for X in node_data])
    theta_hat = np.array(ef.estimate(pooled) if estimate is None else estimate, dtype=float)
    center = float(theta_hat[index])
    threshold = chisq_quantile(1, level)
    scale = 1.0 + abs(center)
    step = 1e-3 * scale if step is None else step
    xtol = 1e-7 * scale if xtol is None else xtol

    def stat(value):
        th = theta_hat.copy()
        th[index] = value
        return statistic_at(th, node_data, ef, graph, solver, config)

    s0 = stat(center)
    if s0 > threshold:
        log.warning("statistic at the point estimate (%.4g) exceeds the threshold", s0)

    def endpoint(direction):
        inner, h = center, step
        for _ in range(max_expand):
            outer = center + direction * h
            if stat(outer) > threshold:
                break
            inner, h = outer, 2.0 * h
        else:
            return inner, False
        while abs(outer - inner) > xtol:
            mid = 0.5 * (inner + outer)
            if stat(mid) > threshold:
                outer = mid
            else:
                inner = mid
        return 0.5 * (inner + outer), True

    lo, lo_ok = endpoint(-1.0)
    hi, hi_ok = endpoint(+1.0)
    return ProfileInterval(lo, hi, center, threshold, lo_ok, hi_ok)
