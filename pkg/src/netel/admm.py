"""Shared pieces of the two decentralized ADMM solvers: configuration, run
reports, stopping tolerances and a few block helpers."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, asdict

import numpy as np


@dataclass
class SolverConfig:
    """Tuning for PCM / MAOM.

    ``rho`` defaults to the per-node sample size ``n``. ``eta`` defaults to
    ``N**2`` (``eta_rule="strict"``); ``eta_rule="relaxed"`` uses
    ``K sqrt(n log K) log n`` instead, meant for theta near the truth.
    ``log_eps`` is the pseudo-log switch point (default ``1/N``).
    """

    rho: float | None = None
    eta: float | None = None
    eta_rule: str = "strict"
    eps_abs: float = 1e-8
    eps_rel: float = 1e-6
    max_iter: int = 5000
    inner_tol: float = 1e-13
    inner_max_iter: int = 50
    log_eps: float | None = None
    record_statistic: bool = True
    keep_history: bool = False

    def __post_init__(self):
        if self.rho is not None and not self.rho > 0:
            raise ValueError("rho must be positive")
        if self.eta is not None and not self.eta > 0:
            raise ValueError("eta must be positive")
        if self.eta_rule not in ("strict", "relaxed"):
            raise ValueError(f"eta_rule must be 'strict' or 'relaxed', got {self.eta_rule!r}")
        for name in ("eps_abs", "eps_rel", "inner_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 1 or self.inner_max_iter < 1:
            raise ValueError("iteration caps must be >= 1")
        if self.log_eps is not None and not self.log_eps > 0:
            raise ValueError("log_eps must be positive")

    def resolve(self, K: int, n: float, N: int) -> "Resolved":
        rho = float(n) if self.rho is None else float(self.rho)
        if self.eta is not None:
            eta = float(self.eta)
        elif self.eta_rule == "strict":
            eta = float(N) ** 2
        else:
            eta = K * math.sqrt(n * math.log(max(K, 2))) * math.log(max(n, 2))
        eps = 1.0 / N if self.log_eps is None else float(self.log_eps)
        return Resolved(rho, eta, eps)


@dataclass(frozen=True)
class Resolved:
    rho: float
    eta: float
    log_eps: float


@dataclass
class RunReport:
    """Per-iteration trace of one solver run."""

    algorithm: str
    rho: float = math.nan
    eta: float = math.nan
    iterations: int = 0
    converged: bool = False
    r_norm: list = field(default_factory=list)
    s_norm: list = field(default_factory=list)
    s_textbook: list = field(default_factory=list)
    s_prox: list = field(default_factory=list)
    eps_pri: list = field(default_factory=list)
    eps_dual: list = field(default_factory=list)
    consensus_gap: list = field(default_factory=list)
    statistic: list = field(default_factory=list)
    iter_time: list = field(default_factory=list)
    wall_time: float = 0.0
    final_statistic: float = math.nan
    inner_iterations: list = field(default_factory=list)
    history: list = field(default_factory=list)
    messages: dict = field(default_factory=dict)
    observer_only: tuple = ("r_norm", "s_norm", "s_textbook", "s_prox", "eps_pri", "eps_dual",
                            "consensus_gap", "statistic")

    def median_iter_time(self) -> float:
        return float(np.median(self.iter_time)) if self.iter_time else math.nan

    def rows(self):
        stats = self.statistic or [math.nan] * self.iterations
        for t in range(self.iterations):
            yield {
                "iter": t + 1,
                "r_norm": self.r_norm[t],
                "s_norm": self.s_norm[t],
                "consensus_gap": self.consensus_gap[t],
                "statistic": stats[t],
            }

    def to_csv(self, path) -> None:
        """Write ``iter, r_norm, s_norm, consensus_gap, statistic`` rows."""
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=["iter", "r_norm", "s_norm",
                                               "consensus_gap", "statistic"])
            w.writeheader()
            for row in self.rows():
                w.writerow({k: (repr(float(v)) if k != "iter" else v) for k, v in row.items()})

    def summary(self) -> dict:
        out = {k: v for k, v in asdict(self).items()
               if k not in ("r_norm", "s_norm", "s_textbook", "s_prox", "eps_pri", "eps_dual",
                            "consensus_gap", "statistic", "iter_time", "history",
                            "inner_iterations", "observer_only")}
        out["median_iter_time"] = self.median_iter_time()
        return out


def block_sum(rows, r: int) -> np.ndarray:
    """Sum a sequence (or ``(k, r)`` array) of length-``r`` blocks.

    Used by both the monolithic runners and the node actors on identically laid
    out inputs, so the rounding is identical.
    """
    rows = np.asarray(rows, dtype=float).reshape(-1, r)
    if rows.shape[0] == 0:
        return np.zeros(r)
    return np.add.reduce(rows, axis=0)


def tolerances(eps_abs, eps_rel, n_primal, n_dual, primal_scale, dual_scale):
    """Absolute/relative ADMM stopping thresholds."""
    eps_pri = eps_abs * math.sqrt(n_primal) + eps_rel * primal_scale
    eps_dual = eps_abs * math.sqrt(n_dual) + eps_rel * dual_scale
    return eps_pri, eps_dual


def consensus_gap(Lam, edges) -> float:
    """Largest ``||lam_i - lam_j||`` over edges (labels 1-based)."""
    if not edges:
        return 0.0
    src = np.array([i for i, _ in edges]) - 1
    dst = np.array([j for _, j in edges]) - 1
    return float(np.max(np.linalg.norm(Lam[src] - Lam[dst], axis=1)))


def node_sizes(blocks):
    sizes = [b.shape[0] for b in blocks]
    return sizes, sum(sizes), float(np.mean(sizes))
