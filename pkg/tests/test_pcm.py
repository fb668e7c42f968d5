import csv

import numpy as np
import pytest

from conftest import make_instance
from oracles import EdgeCopyProx
from netel.admm import SolverConfig
from netel.elcore import ConvergenceError, el_statistic, local_objective
from netel.estfuns import mean_ef
from netel.graph import Graph, incidence
from netel.pcm import (pcm_dual_update, pcm_edge_update, pcm_node_update, pcm_residuals,
                       run_pcm, run_pcm_blocks)


def test_edge_update_large_eta_averages():
    li, lj, vi, vj = np.array([1.0, 2.0]), np.array([0.0, -1.0]), np.array([0.5, 0.0]), np.zeros(2)
    rho = 2.0
    a, b = li + vi / rho, lj + vj / rho
    h = np.linalg.norm(rho * li - rho * lj + vi - vj)
    c1, c2 = pcm_edge_update(li, lj, vi, vj, rho, eta=h / 2)
    np.testing.assert_allclose(c1, (a + b) / 2)
    np.testing.assert_allclose(c2, (a + b) / 2)


def test_edge_update_identical_inputs():
    lam = np.array([0.3, -0.2, 1.0])
    c1, c2 = pcm_edge_update(lam, lam, np.zeros(3), np.zeros(3), 5.0, 0.1)
    np.testing.assert_array_equal(c1, lam)
    np.testing.assert_array_equal(c2, lam)


def test_edge_update_small_eta_keeps_copies_apart():
    li, lj = np.array([1.0, 0.0]), np.array([0.0, 0.0])
    c1, c2 = pcm_edge_update(li, lj, np.zeros(2), np.zeros(2), 1.0, 0.25)
    np.testing.assert_allclose(c1, [0.75, 0.0])
    np.testing.assert_allclose(c2, [0.25, 0.0])


def test_edge_update_matches_prox_oracle():
    rng = np.random.default_rng(7)
    oracle = EdgeCopyProx(2)
    for _ in range(50):
        li, lj, vi, vj = rng.standard_normal((4, 2))
        rho, eta = rng.uniform(0.5, 4), rng.uniform(0, 6)
        got = pcm_edge_update(li, lj, vi, vj, rho, eta)
        want = oracle(li + vi / rho, lj + vj / rho, eta / rho)
        np.testing.assert_allclose(got[0], want[0], atol=1e-8)
        np.testing.assert_allclose(got[1], want[1], atol=1e-8)


def test_node_update_empty_node_linear_formula():
    rng = np.random.default_rng(1)
    V, C = rng.standard_normal((3, 2)), rng.standard_normal((3, 2))
    rho = 4.0
    lam, _ = pcm_node_update(np.zeros((0, 2)), np.zeros(2), V, C, rho, 0.01)
    np.testing.assert_allclose(lam, C.mean(0) - V.sum(0) / (rho * 3), atol=1e-12)


def test_node_update_plug_back():
    rng = np.random.default_rng(2)
    G = rng.standard_normal((100, 3))
    V, C = 0.1 * rng.standard_normal((4, 3)), 0.05 * rng.standard_normal((4, 3))
    rho, eps = 100.0, 1 / 100
    lam, _ = pcm_node_update(G, np.zeros(3), V, C, rho, eps)
    _, grad, _ = local_objective(G, lam, eps)
    resid = grad + V.sum(0) + rho * (4 * lam - C.sum(0))
    assert np.linalg.norm(resid) < 1e-9


def test_node_update_cap_raises():
    G = np.random.default_rng(3).standard_normal((50, 2)) + 3.0
    with pytest.raises(ConvergenceError):
        pcm_node_update(G, np.zeros(2), np.ones((1, 2)) * 50, np.zeros((1, 2)), 1e-3, 1e-6,
                        inner_max_iter=1)


def test_dual_update():
    edges = ((1, 2),)
    V = np.zeros((2, 2))
    Lam = np.array([[1.0, 0.0], [0.0, 0.0]])
    C = np.zeros((2, 2))
    np.testing.assert_allclose(pcm_dual_update(V, Lam, C, 1.0, edges), [[1, 0], [0, 0]])
    C_eq = np.vstack([Lam[0], Lam[1]])
    np.testing.assert_array_equal(pcm_dual_update(V + 3, Lam, C_eq, 2.0, edges), V + 3)


def test_two_node_pooled_mean_goes_to_zero():
    X = np.random.default_rng(4).standard_normal((40, 2))
    data = [X[:20], X[20:]]
    state, rep = run_pcm(Graph(2, ((1, 2),)), data, mean_ef(2), X.mean(0))
    assert rep.converged
    np.testing.assert_allclose(state.Lam, 0.0, atol=1e-7)


def test_two_node_path_matches_reference():
    g, blocks, lam_star = make_instance("linear", d=2, K=2, n=100, graph="complete", seed=3)
    state, rep = run_pcm_blocks(g, blocks, SolverConfig(eta=1e12))
    assert rep.converged
    np.testing.assert_allclose(state.Lam, np.tile(lam_star, (2, 1)), atol=1e-6)


def test_quantile_k10_matches_reference():
    g, blocks, lam_star = make_instance("quantile", d=1, K=10, n=500, seed=5)
    state, rep = run_pcm_blocks(g, blocks)
    assert rep.converged
    assert np.abs(state.Lam - lam_star).max() < 1e-5


@pytest.mark.parametrize("mult", [0.1, 1.0, 10.0])
def test_rho_grid_oracle_equivalence(mult):
    g, blocks, lam_star = make_instance("linear", d=3, K=8, n=200, seed=6)
    state, rep = run_pcm_blocks(g, blocks, SolverConfig(rho=mult * 200, max_iter=20000))
    assert rep.converged
    assert np.abs(state.Lam - lam_star).max() < 1e-5
    stat = -local_objective(np.vstack(blocks), lam_star, 1 / 1600)[0]
    fin = el_statistic(state.Lam, blocks, 1 / 1600)
    assert abs(fin - stat) / (1 + abs(stat)) < 1e-6


def test_residuals_recomputable_and_consensus(mean_instance):
    g, blocks, _ = mean_instance
    cfg = SolverConfig(keep_history=True)
    state, rep = run_pcm_blocks(g, blocks, cfg)
    A_LR = incidence(g).A_LR
    assert state.r1_norm == pytest.approx(np.linalg.norm(A_LR @ state.Lam - state.C), rel=1e-12)
    assert rep.r_norm[-1] == state.r1_norm and rep.r_norm[-1] <= rep.eps_pri[-1]
    assert rep.consensus_gap[-1] <= 10 * rep.eps_pri[-1] / np.sqrt(g.M)
    assert len(rep.history) == rep.iterations == len(rep.s_textbook)
    r, s, *_ = pcm_residuals(A_LR, state.Lam, state.C, state.V, state.V, rep.rho)
    assert s == 0.0 and r == pytest.approx(state.r1_norm)


def test_run_deterministic(mean_instance):
    g, blocks, _ = mean_instance
    a, _ = run_pcm_blocks(g, blocks)
    b, _ = run_pcm_blocks(g, blocks)
    assert np.array_equal(a.Lam, b.Lam)


def test_max_iter_reports_nonconverged(mean_instance):
    g, blocks, _ = mean_instance
    state, rep = run_pcm_blocks(g, blocks, SolverConfig(max_iter=3))
    assert not state.converged and not rep.converged and rep.iterations == 3


def test_shape_errors(mean_instance):
    g, blocks, _ = mean_instance
    with pytest.raises(ValueError):
        run_pcm_blocks(g, blocks[:-1])
    with pytest.raises(ValueError):
        run_pcm_blocks(g, blocks[:-1] + [np.zeros((5, 2))])


def test_report_csv_schema(tmp_path, mean_instance):
    g, blocks, _ = mean_instance
    _, rep = run_pcm_blocks(g, blocks)
    path = tmp_path / "trace.csv"
    rep.to_csv(path)
    rows = list(csv.DictReader(open(path)))
    assert list(rows[0]) == ["iter", "r_norm", "s_norm", "consensus_gap", "statistic"]
    assert len(rows) == rep.iterations
    assert float(rows[-1]["r_norm"]) == rep.r_norm[-1]


@pytest.mark.parametrize("kw", [dict(rho=0), dict(eta=-1), dict(eps_abs=0), dict(max_iter=0),
                                dict(eta_rule="loose"), dict(log_eps=0)])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


def test_config_resolve_defaults():
    res = SolverConfig().resolve(K=10, n=200, N=2000)
    assert (res.rho, res.eta, res.log_eps) == (200.0, 4e6, 1 / 2000)
    rel = SolverConfig(eta_rule="relaxed").resolve(K=10, n=200, N=2000)
    assert rel.eta == pytest.approx(10 * np.sqrt(200 * np.log(10)) * np.log(200))
