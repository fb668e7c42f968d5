"""INI configuration files.

Two optional sections; every key is optional and command-line flags override
file values::

    [experiment]
    family = quantile
    d = 3
    K = 20
    n = 200
    graph = er          ; er | tree | complete
    p_g = 0.3
    tree_p = 1.0
    reps = 300
    levels = 0.90, 0.95
    seed = 0
    tau = 0.05
    rho_mult = 1.0
    eta_rule = strict   ; strict | relaxed

    [solver]
    rho = 200
    eta = 1e8
    eps_abs = 1e-8
    eps_rel = 1e-6
    max_iter = 5000
    inner_tol = 1e-13
    inner_max_iter = 50
"""
from __future__ import annotations

import configparser

from ..admm import SolverConfig
from .data import ExperimentSpec

_EXPERIMENT = {
    "family": str, "d": int, "K": int, "n": int, "graph": str, "p_g": float, "tree_p": float,
    "reps": int, "seed": int, "tau": float, "rho_mult": float, "eta_rule": str,
}
_SOLVER = {
    "rho": float, "eta": float, "eps_abs": float, "eps_rel": float, "max_iter": int,
    "inner_tol": float, "inner_max_iter": int, "log_eps": float, "eta_rule": str,
}


class ConfigError(ValueError):
    pass


def _section(cp, name, schema):
    out = {}
    if not cp.has_section(name):
        return out
    # configparser lower-cases keys; match the schema case-insensitively
    lookup = {k.lower(): k for k in schema}
    for key, raw in cp.items(name):
        if key not in lookup and not (name == "experiment" and key == "levels"):
            raise ConfigError(f"unknown key {key!r} in [{name}]")
        if key == "levels":
            out["levels"] = tuple(float(x) for x in raw.split(","))
            continue
        field = lookup[key]
        try:
            out[field] = schema[field](raw.split(";")[0].strip())
        except ValueError as exc:
            raise ConfigError(f"[{name}] {key}: {exc}") from None
    return out


def read_config(path):
    """Return ``(experiment kwargs, solver kwargs)`` from an INI file."""
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    with open(path) as fh:
        cp.read_file(fh)
    extra = set(cp.sections()) - {"experiment", "solver"}
    if extra:
        raise ConfigError(f"unknown sections: {sorted(extra)}")
    return _section(cp, "experiment", _EXPERIMENT), _section(cp, "solver", _SOLVER)


def build(experiment: dict, solver: dict):
    """Make ``(ExperimentSpec, SolverConfig)``; ``solver`` entries of ``None`` are dropped."""
    spec = ExperimentSpec(**{k: v for k, v in experiment.items() if v is not None})
    solver = {k: v for k, v in solver.items() if v is not None}
    solver.setdefault("eta_rule", spec.eta_rule)
    solver.setdefault("record_statistic", False)
    return spec, SolverConfig(**solver)
