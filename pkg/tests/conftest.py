import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from netel.elcore import moment_blocks, solve_reference  # noqa: E402
from netel.harness.data import (ExperimentSpec, estimating_function, generate_data,  # noqa: E402
                                true_theta)
from netel.harness.experiments import build_graph  # noqa: E402


def make_instance(family="mean", d=3, K=5, n=200, graph="er", p_g=0.3, seed=0):
    """Seeded ``(graph, blocks, lam_star)`` evaluated at the true parameter."""
    spec = ExperimentSpec(family=family, d=d, K=K, n=n, graph=graph, p_g=p_g, seed=seed)
    ef = estimating_function(spec)
    blocks = moment_blocks(generate_data(spec), ef, true_theta(spec))
    return build_graph(spec, seed), blocks, solve_reference(np.vstack(blocks))


@pytest.fixture
def mean_instance():
    return make_instance()


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS, key=lambda k: int(k[1:])):
        terminalreporter.write_line(mod.RESULTS[key])
