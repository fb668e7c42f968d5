"""Synthetic data for the simulation designs and the experiment specification."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..estfuns import EstimatingFunction, by_name, compound_symmetry, sigmoid

LINEAR_BETA = (2.0, 0.5, 4.0, math.sqrt(6.0), -3.0)
LOGISTIC_BETA = (1.0, -2.0, 4.0, 2.0, -0.5)
REPEATED_BETA = (1.0, 5.0)
WEIBULL_SHAPE = 1.5
WEIBULL_SCALE = 200.0


def ar1_cov(d: int, rho: float = 0.5) -> np.ndarray:
    """``sigma_ab = rho**|a - b|``."""
    idx = np.arange(d)
    return rho ** np.abs(idx[:, None] - idx[None, :])


def weibull_quantile(tau: float, shape=WEIBULL_SHAPE, scale=WEIBULL_SCALE) -> float:
    return scale * (-math.log(1.0 - tau)) ** (1.0 / shape)


def _coefs(base, d):
    # Designs fix d = 5; other sizes cycle through the same coefficients.
    return np.resize(np.asarray(base, dtype=float), d)


@dataclass(frozen=True)
class ExperimentSpec:
    """One simulation design.

    ``d`` is the covariate dimension (ignored for quantile and repeated).
    ``graph`` is ``"er"`` (with ``p_g``), ``"tree"`` or ``"complete"``. A
    ``"tree"`` is the breadth-first spanning tree of ``G(K, tree_p)``; the
    default ``tree_p = 1`` gives the star centred on node 1.
    """

    family: str = "mean"
    d: int = 3
    K: int = 10
    n: int = 200
    graph: str = "er"
    p_g: float = 0.3
    tree_p: float = 1.0
    reps: int = 100
    levels: tuple = (0.90, 0.95)
    seed: int = 0
    tau: float = 0.05
    rho_mult: float = 1.0
    eta_rule: str = "strict"

    def __post_init__(self):
        if self.K < 1 or self.n < 1:
            raise ValueError("K and n must be positive")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if any(not (0.0 < lv < 1.0) for lv in self.levels):
            raise ValueError("levels must lie in (0, 1)")
        if self.graph not in ("er", "tree", "complete"):
            raise ValueError(f"unknown graph model {self.graph!r}")
        if not (0.0 < self.p_g <= 1.0) or not (0.0 < self.tree_p <= 1.0):
            raise ValueError("edge probabilities must lie in (0, 1]")
        estimating_function(self)  # validates family and d

    @property
    def N(self) -> int:
        return self.K * self.n

    def with_(self, **kw) -> "ExperimentSpec":
        return replace(self, **kw)


def estimating_function(spec: ExperimentSpec) -> EstimatingFunction:
    if spec.family == "quantile":
        return by_name("quantile", tau=spec.tau)
    if spec.family == "repeated":
        return by_name("repeated")
    return by_name(spec.family, d=spec.d)


def true_theta(spec: ExperimentSpec) -> np.ndarray:
    """Parameter value at which the data are generated."""
    f = spec.family
    if f == "quantile":
        return np.array([weibull_quantile(spec.tau)])
    if f == "linear":
        return _coefs(LINEAR_BETA, spec.d)
    if f == "logistic":
        return _coefs(LOGISTIC_BETA, spec.d)
    if f == "mean":
        return np.ones(spec.d)
    if f == "repeated":
        return np.array(REPEATED_BETA)
    raise ValueError(f"unknown family {f!r}")


def sample(spec: ExperimentSpec, N: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``N`` observations in the family's row layout."""
    f, d = spec.family, spec.d
    theta = true_theta(spec)
    if f == "quantile":
        return (WEIBULL_SCALE * rng.weibull(WEIBULL_SHAPE, size=N)).reshape(-1, 1)
    if f in ("linear", "logistic"):
        X = rng.standard_normal((N, d)) @ np.linalg.cholesky(ar1_cov(d)).T
        eta = X @ theta
        if f == "linear":
            Y = eta + rng.standard_normal(N)
        else:
            Y = (rng.random(N) < sigmoid(eta)).astype(float)
        return np.column_stack([Y, X])
    if f == "mean":
        X = rng.standard_normal((N, d)) @ np.linalg.cholesky(compound_symmetry(d)).T
        return X + theta
    if f == "repeated":
        T, q = 3, len(theta)
        X = rng.standard_normal((N, T, q)) @ np.linalg.cholesky(ar1_cov(q)).T
        err = rng.standard_normal((N, T)) @ np.linalg.cholesky(compound_symmetry(T)).T
        Y = X @ theta + err
        return np.column_stack([Y, X.reshape(N, T * q)])
    raise ValueError(f"unknown family {f!r}")


def generate_data(spec: ExperimentSpec, seed=None):
    """Draw ``N = K n`` observations and deal them to the nodes at random.

    Returns a list of ``K`` arrays of ``n`` rows each. ``seed`` defaults to
    ``spec.seed``; anything accepted by ``numpy.random.default_rng`` works.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    Z = sample(spec, spec.N, rng)
    Z = Z[rng.permutation(spec.N)]
    return [np.ascontiguousarray(b) for b in np.split(Z, spec.K)]


def replication_seed(seed: int, rep: int) -> np.random.SeedSequence:
    """Independent substream for replication ``rep``, so any replication can be rerun alone."""
    return np.random.SeedSequence([int(seed), int(rep)])
