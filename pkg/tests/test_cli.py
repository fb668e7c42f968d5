import csv

import numpy as np
import pytest

from netel.graph import load_edge_list
from netel.harness.cli import load_regression_csv, main


def test_solve_prints_decision(capsys):
    assert main(["solve", "--family", "mean", "--K", "4", "--n", "50", "--seed", "1"]) == 0
    out = capsys.readouterr().out
    assert "statistic =" in out and "p-value" in out
    assert "accept" in out or "reject" in out


def test_solve_decentralized_writes_files(tmp_path, capsys):
    rc = main(["solve", "--family", "quantile", "--K", "5", "--n", "40", "--algo", "pcm",
               "--decentralized", "--out", str(tmp_path)])
    assert rc == 0
    rows = list(csv.DictReader(open(tmp_path / "traffic.csv")))
    assert rows and list(rows[0]) == ["node", "round", "msgs_sent", "blocks_sent"]
    assert (tmp_path / "trace.csv").exists()


def test_solve_theta_far_rejects(capsys):
    assert main(["solve", "--family", "mean", "--d", "1", "--K", "3", "--n", "60",
                 "--theta", "1.6", "--algo", "reference"]) == 0
    assert "reject" in capsys.readouterr().out


def test_graph_gen_and_tree(tmp_path):
    assert main(["graph", "gen", "--K", "50", "--p", "0.3", "--seed", "2", "--out", str(tmp_path)]) == 0
    assert main(["graph", "tree", "--out", str(tmp_path)]) == 0
    g = load_edge_list(tmp_path / "graph.txt")
    t = load_edge_list(tmp_path / "tree.txt")
    assert g.K == 50 and t.M == 49 and t.is_tree and set(t.edges) <= set(g.edges)


def test_coverage_iterations_rho(tmp_path):
    out = str(tmp_path)
    assert main(["coverage", "--family", "quantile", "--K", "3", "--n", "30", "--reps", "3",
                 "--out", out]) == 0
    assert main(["iterations", "--K", "4", "--n", "40", "--reps", "1",
                 "--topologies", "tree,complete", "--out", out]) == 0
    assert main(["rho-sweep", "--K", "4", "--n", "40", "--reps", "1", "--mults", "1,10",
                 "--algos", "maom", "--out", out]) == 0
    names = sorted(p.name for p in tmp_path.iterdir())
    assert len(names) >= 3 and all(n.endswith(".csv") for n in names)


def test_config_flag(tmp_path, capsys):
    ini = tmp_path / "c.ini"
    ini.write_text("[experiment]\nfamily = linear\nd = 2\nK = 3\nn = 60\n")
    assert main(["solve", "--config", str(ini), "--algo", "maom"]) == 0
    assert "statistic" in capsys.readouterr().out


def test_interval(capsys):
    assert main(["interval", "--family", "quantile", "--K", "3", "--n", "60"]) == 0
    assert "(" in capsys.readouterr().out


def test_ingest_csv(tmp_path, capsys):
    rng = np.random.default_rng(0)
    x = rng.standard_normal((300, 2))
    y = (rng.random(300) < 1 / (1 + np.exp(-(0.5 + x @ [1.0, -1.0])))).astype(int)
    path = tmp_path / "d.csv"
    with open(path, "w") as fh:
        fh.write("y,a,b\n")
        for yi, (a, b) in zip(y, x):
            fh.write(f"{yi},{a},{b}\n")
    Z, names = load_regression_csv(path, "y")
    assert names == ["(intercept)", "a", "b"]
    assert Z.shape == (300, 4)
    np.testing.assert_array_equal(Z[:, 1], 1.0)
    np.testing.assert_allclose(Z[:, 2:].mean(0), 0.0, atol=1e-12)
    assert main(["ingest-csv", "--csv", str(path), "--response", "y", "--K", "3",
                 "--algo", "reference"]) == 0


def test_errors_exit_2(tmp_path, capsys):
    assert main(["graph", "tree", "--input", str(tmp_path / "missing.txt")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--family", "poisson"])
    assert exc.value.code == 2
