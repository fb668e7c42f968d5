"""Pure numpy implementation of the hot kernels.

Every function here has a compiled twin in ``_kernels.pyx`` with the same
signature and return layout. Row-wise kernels (edge updates, thresholding)
process each row independently with a fixed summation order, so calling them
on a subset of rows gives bit-identical results to calling them on the whole
array. The decentralized simulator relies on that.
"""
import math

import numpy as np

__all__ = [
    "log_star_terms",
    "local_terms",
    "local_value",
    "pcm_node_solve",
    "maom_node_solve",
    "pcm_edges",
    "maom_edges",
    "soft_threshold_rows",
]


def log_star_terms(z, eps):
    """Pseudo-logarithm and its first two derivatives, elementwise."""
    z = np.asarray(z, dtype=float)
    low = z < eps
    zs = np.where(low, eps, z)
    e2 = eps * eps
    val = np.where(low, math.log(eps) - 1.5 + 2.0 * z / eps - z * z / (2.0 * e2), np.log(zs))
    d1 = np.where(low, 2.0 / eps - z / e2, 1.0 / zs)
    d2 = np.where(low, -1.0 / e2, -1.0 / (zs * zs))
    return val, d1, d2


def local_terms(G, lam, eps):
    """Value, gradient and Hessian of ``-2 * sum_j log*(1 + lam'g_j)``."""
    G = np.asarray(G, dtype=float)
    r = G.shape[1]
    if G.shape[0] == 0:
        return 0.0, np.zeros(r), np.zeros((r, r))
    z = 1.0 + G @ lam
    val, d1, d2 = log_star_terms(z, eps)
    grad = -2.0 * (G.T @ d1)
    hess = -2.0 * ((G.T * d2) @ G)
    hess = 0.5 * (hess + hess.T)
    return -2.0 * float(val.sum()), grad, hess


def local_value(G, lam, eps):
    G = np.asarray(G, dtype=float)
    if G.shape[0] == 0:
        return 0.0
    val, _, _ = log_star_terms(1.0 + G @ lam, eps)
    return -2.0 * float(val.sum())


def _phi(val, lam, vsum, csum, deg, rho):
    return val + float(vsum @ lam) + 0.5 * rho * deg * float(lam @ lam) - rho * float(csum @ lam)


def pcm_node_solve(G, lam0, vsum, csum, deg, rho, eps, tol, max_iter):
    """Damped Newton for ``l_i(lam) + vsum'lam + (rho/2) sum_k ||lam - c_k||^2``.

    Returns ``(lam, iterations, grad_norm, converged)``.
    """
    lam = np.array(lam0, dtype=float)
    r = lam.shape[0]
    eye = np.eye(r)
    val, g, H = local_terms(G, lam, eps)
    for it in range(max_iter + 1):
        grad = g + vsum + rho * (deg * lam - csum)
        gnorm = math.sqrt(float(grad @ grad))
        if gnorm <= tol:
            return lam, it, gnorm, True
        if it == max_iter:
            break
        step = np.linalg.solve(H + (rho * deg) * eye, grad)
        f0 = _phi(val, lam, vsum, csum, deg, rho)
        slack = 1e-12 * (1.0 + abs(f0))
        t = 1.0
        while True:
            cand = lam - t * step
            cval, cg, cH = local_terms(G, cand, eps)
            if _phi(cval, cand, vsum, csum, deg, rho) <= f0 + slack or t < 1e-12:
                break
            t *= 0.5
        lam, val, g, H = cand, cval, cg, cH
    return lam, max_iter, gnorm, False


def maom_node_solve(G, lam, nb_sum, edge_term, deg, rho, eps):
    """Single closed-form MAOM multiplier update; returns ``(lam_new, l_i(lam))``."""
    lam = np.asarray(lam, dtype=float)
    r = lam.shape[0]
    val, g, H = local_terms(G, lam, eps)
    eye = np.eye(r)
    lhs = H + (2.0 * rho * deg + 1.0) * eye
    rhs = (H + (rho * deg + 1.0) * eye) @ lam + rho * nb_sum + edge_term - g
    return np.linalg.solve(lhs, rhs), val


def _row_norms(H):
    s = np.zeros(H.shape[0])
    for j in range(H.shape[1]):
        s += H[:, j] * H[:, j]
    return np.sqrt(s)


def pcm_edges(lam_l, lam_r, v_l, v_r, rho, eta):
    """Joint closed-form copy update for a batch of edges (one row per edge)."""
    lam_l = np.asarray(lam_l, dtype=float)
    lam_r = np.asarray(lam_r, dtype=float)
    v_l = np.asarray(v_l, dtype=float)
    v_r = np.asarray(v_r, dtype=float)
    h = rho * lam_l - rho * lam_r + v_l - v_r
    nrm = _row_norms(h)
    safe = np.where(nrm > 0.0, nrm, 1.0)
    omega = np.where(nrm > 0.0, np.maximum(1.0 - eta / safe, 0.5), 0.5)[:, None]
    a = lam_l + v_l / rho
    b = lam_r + v_r / rho
    c_l = omega * a + (1.0 - omega) * b
    c_r = (1.0 - omega) * a + omega * b
    return c_l, c_r


def soft_threshold_rows(H, t):
    """Groupwise soft-thresholding ``(1 - t/||h||)_+ h`` applied to each row."""
    H = np.asarray(H, dtype=float)
    nrm = _row_norms(H)
    safe = np.where(nrm > 0.0, nrm, 1.0)
    factor = np.where(nrm > t, 1.0 - t / safe, 0.0)
    return factor[:, None] * H


def maom_edges(lam_l, lam_r, T, rho, eta):
    """Difference-variable update for a batch of edges."""
    lam_l = np.asarray(lam_l, dtype=float)
    lam_r = np.asarray(lam_r, dtype=float)
    T = np.asarray(T, dtype=float)
    return soft_threshold_rows(lam_l - lam_r + T / rho, eta / rho)
