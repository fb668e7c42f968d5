"""Estimating-function families.

Each family maps an ``(n, d)`` observation block and a parameter ``theta`` to an
``(n, r)`` block of estimating-function values, one row per observation.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


class EstimatingFunctionError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatingFunction:
    """An r-dimensional estimating function g(x; theta) with x in R^d, theta in R^p."""

    name: str
    d: int
    p: int
    r: int
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    point_estimate: Callable[[np.ndarray], np.ndarray] | None = None

    def __call__(self, X, theta) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1) if self.d > 1 else X.reshape(-1, 1)
        if X.shape[1] != self.d:
            raise EstimatingFunctionError(
                f"{self.name}: observations have {X.shape[1]} columns, expected d={self.d}")
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        if theta.shape != (self.p,):
            raise EstimatingFunctionError(
                f"{self.name}: theta has shape {theta.shape}, expected ({self.p},)")
        if not np.all(np.isfinite(theta)):
            raise EstimatingFunctionError(f"{self.name}: theta must be finite")
        return self.func(X, theta)

    def estimate(self, X) -> np.ndarray:
        """Root of the pooled moment equations (least squares when r > p)."""
        X = np.asarray(X, dtype=float)
        if self.point_estimate is not None:
            return np.atleast_1d(self.point_estimate(X))
        from scipy.optimize import least_squares

        sol = least_squares(lambda th: self(X, th).mean(axis=0), np.zeros(self.p),
                            xtol=1e-14, ftol=1e-14, gtol=1e-14)
        return sol.x


def quantile_ef(tau: float = 0.05) -> EstimatingFunction:
    """Quantile score psi(X - beta): -1 if X <= beta, tau/(1-tau) otherwise."""
    if not (0.0 < tau < 1.0):
        raise EstimatingFunctionError(f"tau must lie in (0, 1), got {tau}")
    upper = tau / (1.0 - tau)

    def g(X, beta):
        return np.where(X[:, :1] - beta[0] <= 0.0, -1.0, upper)

    def est(X):
        return np.array([np.quantile(X[:, 0], tau)])

    return EstimatingFunction("quantile", 1, 1, 1, g, est)


def linear_ef(d: int) -> EstimatingFunction:
    """Least-squares score X (Y - X'beta); observation layout (Y, X_1..X_d)."""
    if d < 1:
        raise EstimatingFunctionError("d must be >= 1")

    def g(Z, beta):
        Y, X = Z[:, 0], Z[:, 1:]
        return X * (Y - X @ beta)[:, None]

    def est(Z):
        Y, X = Z[:, 0], Z[:, 1:]
        return np.linalg.lstsq(X, Y, rcond=None)[0]

    return EstimatingFunction("linear", d + 1, d, d, g, est)


def sigmoid(t):
    """Logistic function evaluated branch-wise so that exp never overflows."""
    t = np.asarray(t, dtype=float)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logistic_ef(d: int) -> EstimatingFunction:
    """Logistic score X (Y - sigmoid(X'beta)); observation layout (Y, X_1..X_d)."""
    if d < 1:
        raise EstimatingFunctionError("d must be >= 1")

    def g(Z, beta):
        Y, X = Z[:, 0], Z[:, 1:]
        if not np.all((Y == 0.0) | (Y == 1.0)):
            raise EstimatingFunctionError("logistic: responses must be 0 or 1")
        return X * (Y - sigmoid(X @ beta))[:, None]

    def est(Z):
        Y, X = Z[:, 0], Z[:, 1:]
        beta = np.zeros(X.shape[1])
        for _ in range(100):
            mu = sigmoid(X @ beta)
            score = X.T @ (Y - mu)
            info = (X.T * (mu * (1.0 - mu))) @ X
            step = np.linalg.solve(info, score)
            beta = beta + step
            if np.max(np.abs(step)) < 1e-12:
                break
        return beta

    return EstimatingFunction("logistic", d + 1, d, d, g, est)


def mean_ef(d: int) -> EstimatingFunction:
    """g(X; mu) = X - mu."""
    if d < 1:
        raise EstimatingFunctionError("d must be >= 1")
    return EstimatingFunction("mean", d, d, d, lambda X, mu: X - mu,
                              lambda X: X.mean(axis=0))


def compound_symmetry(s: int, rho: float = 0.5) -> np.ndarray:
    """Unit diagonal, constant off-diagonal ``rho``."""
    return np.full((s, s), rho) + (1.0 - rho) * np.eye(s)


def repeated_ef(T: int = 3, q: int = 2, working=None) -> EstimatingFunction:
    """Repeated-measures score with two working correlations (r = 2q).

    Observation layout: ``(Y_1..Y_T, X_1', .., X_T')`` with each ``X_t`` in R^q.
    ``g_l = [X_1 .. X_T] M_l (Y - X'beta)`` for ``M_1 = I_T`` and
    ``M_2 = compound_symmetry(T)``; the conditional-variance scaling is the identity.
    """
    mats = working if working is not None else (np.eye(T), compound_symmetry(T))
    mats = tuple(np.asarray(m, dtype=float) for m in mats)

    def split(Z):
        Y = Z[:, :T]
        X = Z[:, T:].reshape(-1, T, q)
        return Y, X

    def g(Z, beta):
        Y, X = split(Z)
        resid = Y - X @ beta                          # (n, T)
        parts = [np.einsum("ntq,ts,ns->nq", X, M, resid) for M in mats]
        return np.concatenate(parts, axis=1)

    return EstimatingFunction("repeated", T + T * q, q, q * len(mats), g)


FAMILIES = {
    "quantile": quantile_ef,
    "linear": linear_ef,
    "logistic": logistic_ef,
    "mean": mean_ef,
    "repeated": repeated_ef,
}


def by_name(name: str, d: int | None = None, **kw) -> EstimatingFunction:
    """Look up a family by its config name; ``d`` is the covariate dimension."""
    try:
        factory = FAMILIES[name]
    except KeyError:
        raise EstimatingFunctionError(
            f"unknown family {name!r}; choose from {sorted(FAMILIES)}") from None
    if name in ("linear", "logistic", "mean"):
        return factory(d if d is not None else 5 if name != "mean" else 3)
    if name == "quantile":
        return factory(kw.get("tau", 0.05))
    return factory()
