import numpy as np
import pytest

from netel import kernels
from netel.kernels import backends

IMPLS = backends()
PAIRS = [("python", "compiled")] if "compiled" in IMPLS else []


def test_backend_selection():
    assert kernels.BACKEND in IMPLS


def _inputs(seed=0, n=300, r=3, M=40):
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((n, r))
    lam = 0.3 * rng.standard_normal(r)
    E = [rng.standard_normal((M, r)) for _ in range(4)]
    return G, lam, E


@pytest.mark.skipif(not PAIRS, reason="compiled extension not built")
@pytest.mark.parametrize("eps", [1.0 / 300, 0.9])  # second value forces the quadratic branch
def test_backends_agree(eps):
    py, cy = IMPLS["python"], IMPLS["compiled"]
    G, lam, (a, b, c, d) = _inputs()
    for x, y in zip(py.local_terms(G, lam, eps), cy.local_terms(G, lam, eps)):
        np.testing.assert_allclose(x, y, rtol=1e-11, atol=1e-11)
    assert py.local_value(G, lam, eps) == pytest.approx(cy.local_value(G, lam, eps), rel=1e-12)
    z = np.linspace(-2, 3, 41)
    for x, y in zip(py.log_star_terms(z, eps), cy.log_star_terms(z, eps)):
        np.testing.assert_allclose(x, y, rtol=1e-13)
    args = (G, lam, np.ones(3), 2 * lam, 2.0, 300.0, eps, 1e-11, 50)
    p, q = py.pcm_node_solve(*args), cy.pcm_node_solve(*args)
    np.testing.assert_allclose(p[0], q[0], rtol=1e-9, atol=1e-12)
    assert p[3] and q[3]
    args = (G, lam, 2 * lam, np.ones(3), 2.0, 300.0, eps)
    np.testing.assert_allclose(py.maom_node_solve(*args)[0], cy.maom_node_solve(*args)[0], rtol=1e-11)
    for x, y in zip(py.pcm_edges(a, b, c, d, 30.0, 2.0), cy.pcm_edges(a, b, c, d, 30.0, 2.0)):
        np.testing.assert_allclose(x, y, rtol=1e-13)
    np.testing.assert_allclose(py.maom_edges(a, b, c, 3.0, 4.0), cy.maom_edges(a, b, c, 3.0, 4.0),
                               rtol=1e-13)


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_row_kernels_are_bit_identical_on_subsets(name):
    k = IMPLS[name]
    _, _, (a, b, c, d) = _inputs(1)
    rows = np.array([3, 17, 0, 39])
    full = k.pcm_edges(a, b, c, d, 30.0, 2.0)
    part = k.pcm_edges(a[rows], b[rows], c[rows], d[rows], 30.0, 2.0)
    for x, y in zip(full, part):
        assert np.array_equal(x[rows], y)
    full = k.maom_edges(a, b, c, 3.0, 4.0)
    assert np.array_equal(full[rows], k.maom_edges(a[rows], b[rows], c[rows], 3.0, 4.0))
    one = k.maom_edges(a[5:6], b[5:6], c[5:6], 3.0, 4.0)
    assert np.array_equal(full[5:6], one)


@pytest.mark.parametrize("name", sorted(IMPLS))
def test_empty_block(name):
    k = IMPLS[name]
    val, g, H = k.local_terms(np.zeros((0, 2)), np.ones(2), 0.1)
    assert val == 0.0 and not g.any() and not H.any()
