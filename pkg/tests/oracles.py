"""Independent numerical oracles used by the tests.

The prox oracles never evaluate the closed forms under test. A conic solve
locates the minimiser; it is then refined by trust-region Newton descent on the
smooth branch of the objective (when the conic solution is clearly away from
the kink) and compared against the kink candidate, the minimiser restricted to
the set where the norm term is not differentiable. Whichever has the lower
objective is returned.
"""
import cvxpy as cp
import numpy as np


def _polish(f, grad, hess, x0, iters=50):
    """Damped Newton on a smooth strongly convex objective."""
    x = np.array(x0, dtype=float)
    for _ in range(iters):
        g = grad(x)
        if np.linalg.norm(g) < 1e-15:
            break
        step = np.linalg.solve(hess(x), g)
        t, fx = 1.0, f(x)
        slack = 1e-13 * (1.0 + abs(fx))  # near the optimum f changes below rounding
        while f(x - t * step) > fx + slack and t > 1e-10:
            t *= 0.5
        x = x - t * step
    return x


def _norm_hess(d, k):
    n = np.linalg.norm(d)
    u = d / n
    return k * (np.eye(len(d)) - np.outer(u, u)) / n


class GroupLassoProx:
    """``argmin_z k ||z|| + 0.5 ||h - z||^2`` (the thresholding subproblem, scaled by rho)."""

    def __init__(self, r):
        self.z = cp.Variable(r)
        self.h = cp.Parameter(r)
        self.k = cp.Parameter(nonneg=True)
        obj = self.k * cp.norm(self.z, 2) + 0.5 * cp.sum_squares(self.h - self.z)
        self.prob = cp.Problem(cp.Minimize(obj))

    def __call__(self, h, k):
        h = np.asarray(h, dtype=float)
        self.h.value, self.k.value = h, float(k)
        self.prob.solve(solver="CLARABEL")
        f = lambda z: k * np.linalg.norm(z) + 0.5 * np.sum((h - z) ** 2)
        g = lambda z: k * z / max(np.linalg.norm(z), 1e-300) - (h - z)
        cands = [np.zeros_like(h)]
        z0 = self.z.value
        if np.linalg.norm(z0) > 1e-6:
            hs = lambda z: _norm_hess(z, k) + np.eye(len(z))
            cands.append(_polish(f, g, hs, z0))
        return min(cands, key=f)


class EdgeCopyProx:
    """``argmin_{c1,c2} k ||c1 - c2|| + 0.5 ||c1 - a||^2 + 0.5 ||c2 - b||^2``.

    This is the per-edge copy subproblem divided by rho, with ``k = eta/rho``,
    ``a = lam_i + v_ij/rho`` and ``b = lam_j + v_ji/rho``.
    """

    def __init__(self, r):
        self.r = r
        self.c1, self.c2 = cp.Variable(r), cp.Variable(r)
        self.a, self.b = cp.Parameter(r), cp.Parameter(r)
        self.k = cp.Parameter(nonneg=True)
        obj = (self.k * cp.norm(self.c1 - self.c2, 2) + 0.5 * cp.sum_squares(self.c1 - self.a)
               + 0.5 * cp.sum_squares(self.c2 - self.b))
        self.prob = cp.Problem(cp.Minimize(obj))

    def __call__(self, a, b, k):
        a, b, r = np.asarray(a, float), np.asarray(b, float), self.r
        self.a.value, self.b.value, self.k.value = a, b, float(k)
        self.prob.solve(solver="CLARABEL")

        def f(x):
            return (k * np.linalg.norm(x[:r] - x[r:]) + 0.5 * np.sum((x[:r] - a) ** 2)
                    + 0.5 * np.sum((x[r:] - b) ** 2))

        def g(x):
            d = x[:r] - x[r:]
            u = k * d / max(np.linalg.norm(d), 1e-300)
            return np.concatenate([u + x[:r] - a, -u + x[r:] - b])

        # kink candidate: minimise the smooth part on the set c1 = c2
        c = _polish(lambda y: 0.5 * np.sum((y - a) ** 2) + 0.5 * np.sum((y - b) ** 2),
                    lambda y: 2 * y - a - b, lambda y: 2 * np.eye(r), np.zeros(r))
        cands = [np.concatenate([c, c])]
        x0 = np.concatenate([self.c1.value, self.c2.value])
        if np.linalg.norm(x0[:r] - x0[r:]) > 1e-6:
            def h(x):
                N = _norm_hess(x[:r] - x[r:], k)
                return np.block([[N, -N], [-N, N]]) + np.eye(2 * r)
            cands.append(_polish(f, g, h, x0))
        best = min(cands, key=f)
        return best[:r], best[r:]
