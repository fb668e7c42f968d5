# cython: language_level=3
"""Compiled kernels; same contracts as ``_kernels_py``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt, fabs

cnp.import_array()


cdef inline void _log_star(double z, double eps, double leps,
                           double* val, double* d1, double* d2) noexcept nogil:
    cdef double e2
    if z < eps:
        e2 = eps * eps
        val[0] = leps - 1.5 + 2.0 * z / eps - z * z / (2.0 * e2)
        d1[0] = 2.0 / eps - z / e2
        d2[0] = -1.0 / e2
    else:
        val[0] = log(z)
        d1[0] = 1.0 / z
        d2[0] = -1.0 / (z * z)


def log_star_terms(z, double eps):
    cdef cnp.ndarray[double, ndim=1] zz = np.ascontiguousarray(np.atleast_1d(z), dtype=float).ravel()
    cdef Py_ssize_t n = zz.shape[0], i
    out_v = np.empty(n)
    out_1 = np.empty(n)
    out_2 = np.empty(n)
    cdef double[::1] ov = out_v, o1 = out_1, o2 = out_2
    cdef double leps = log(eps)
    for i in range(n):
        _log_star(zz[i], eps, leps, &ov[i], &o1[i], &o2[i])
    shape = np.shape(z)
    return out_v.reshape(shape), out_1.reshape(shape), out_2.reshape(shape)


cdef double _terms(const double[:, ::1] G, const double[::1] lam, double eps,
                   double[::1] grad, double[:, ::1] hess, bint want_hess) noexcept nogil:
    cdef Py_ssize_t n = G.shape[0], r = G.shape[1], j, a, b
    cdef double z, v, d1, d2, total = 0.0, leps = log(eps)
    for a in range(r):
        grad[a] = 0.0
        if want_hess:
            for b in range(r):
                hess[a, b] = 0.0
    for j in range(n):
        z = 1.0
        for a in range(r):
            z += G[j, a] * lam[a]
        _log_star(z, eps, leps, &v, &d1, &d2)
        total += v
        for a in range(r):
            grad[a] += d1 * G[j, a]
        if want_hess:
            for a in range(r):
                for b in range(a, r):
                    hess[a, b] += d2 * G[j, a] * G[j, b]
    for a in range(r):
        grad[a] *= -2.0
        if want_hess:
            for b in range(a, r):
                hess[a, b] *= -2.0
                hess[b, a] = hess[a, b]
    return -2.0 * total


def local_terms(G, lam, double eps):
    cdef const double[:, ::1] Gv = np.ascontiguousarray(G, dtype=float)
    cdef const double[::1] lv = np.ascontiguousarray(lam, dtype=float)
    r = Gv.shape[1]
    grad = np.zeros(r)
    hess = np.zeros((r, r))
    cdef double[::1] gv = grad
    cdef double[:, ::1] hv = hess
    cdef double val
    with nogil:
        val = _terms(Gv, lv, eps, gv, hv, True)
    return val, grad, hess


def local_value(G, lam, double eps):
    cdef const double[:, ::1] Gv = np.ascontiguousarray(G, dtype=float)
    cdef const double[::1] lv = np.ascontiguousarray(lam, dtype=float)
    cdef Py_ssize_t n = Gv.shape[0], r = Gv.shape[1], j, a
    cdef double z, v, d1, d2, total = 0.0, leps = log(eps)
    with nogil:
        for j in range(n):
            z = 1.0
            for a in range(r):
                z += Gv[j, a] * lv[a]
            _log_star(z, eps, leps, &v, &d1, &d2)
            total += v
    return -2.0 * total


cdef bint _chol_solve(double[:, ::1] A, double[::1] b, double[::1] x) noexcept nogil:
    """Solve A x = b for symmetric positive definite A; A is overwritten."""
    cdef Py_ssize_t r = A.shape[0], i, j, k
    cdef double s
    for j in range(r):
        s = A[j, j]
        for k in range(j):
            s -= A[j, k] * A[j, k]
        if s <= 0.0:
            return False
        A[j, j] = sqrt(s)
        for i in range(j + 1, r):
            s = A[i, j]
            for k in range(j):
                s -= A[i, k] * A[j, k]
            A[i, j] = s / A[j, j]
    for i in range(r):
        s = b[i]
        for k in range(i):
            s -= A[i, k] * x[k]
        x[i] = s / A[i, i]
    for i in range(r - 1, -1, -1):
        s = x[i]
        for k in range(i + 1, r):
            s -= A[k, i] * x[k]
        x[i] = s / A[i, i]
    return True


cdef inline double _dot(const double[::1] a, const double[::1] b) noexcept nogil:
    cdef Py_ssize_t i
    cdef double s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


def pcm_node_solve(G, lam0, vsum, csum, double deg, double rho, double eps,
                   double tol, int max_iter):
    cdef const double[:, ::1] Gv = np.ascontiguousarray(G, dtype=float)
    cdef const double[::1] vs = np.ascontiguousarray(vsum, dtype=float)
    cdef const double[::1] cs = np.ascontiguousarray(csum, dtype=float)
    cdef Py_ssize_t r = Gv.shape[1], a, b
    lam_arr = np.array(lam0, dtype=float)
    cdef double[::1] lam = lam_arr
    cdef double[::1] cand = np.empty(r)
    cdef double[::1] g = np.empty(r), cg = np.empty(r), grad = np.empty(r), step = np.empty(r)
    cdef double[:, ::1] H = np.empty((r, r)), cH = np.empty((r, r)), M = np.empty((r, r))
    cdef double val, cval, f0, fc, slack, t, gnorm = 0.0
    cdef int it = 0
    cdef bint ok, done = False
    with nogil:
        val = _terms(Gv, lam, eps, g, H, True)
        for it in range(max_iter + 1):
            for a in range(r):
                grad[a] = g[a] + vs[a] + rho * (deg * lam[a] - cs[a])
            gnorm = sqrt(_dot(grad, grad))
            if gnorm <= tol:
                done = True
                break
            if it == max_iter:
                break
            for a in range(r):
                for b in range(r):
                    M[a, b] = H[a, b]
                M[a, a] += rho * deg
            ok = _chol_solve(M, grad, step)
            if not ok:
                break
            f0 = val + _dot(vs, lam) + 0.5 * rho * deg * _dot(lam, lam) - rho * _dot(cs, lam)
            slack = 1e-12 * (1.0 + fabs(f0))
            t = 1.0
            while True:
                for a in range(r):
                    cand[a] = lam[a] - t * step[a]
                cval = _terms(Gv, cand, eps, cg, cH, True)
                fc = cval + _dot(vs, cand) + 0.5 * rho * deg * _dot(cand, cand) - rho * _dot(cs, cand)
                if fc <= f0 + slack or t < 1e-12:
                    break
                t *= 0.5
            for a in range(r):
                lam[a] = cand[a]
                g[a] = cg[a]
                for b in range(r):
                    H[a, b] = cH[a, b]
            val = cval
    if done:
        return lam_arr, it, gnorm, True
    return lam_arr, max_iter, gnorm, False


def maom_node_solve(G, lam, nb_sum, edge_term, double deg, double rho, double eps):
    cdef const double[:, ::1] Gv = np.ascontiguousarray(G, dtype=float)
    cdef const double[::1] lv = np.ascontiguousarray(lam, dtype=float)
    cdef const double[::1] nb = np.ascontiguousarray(nb_sum, dtype=float)
    cdef const double[::1] et = np.ascontiguousarray(edge_term, dtype=float)
    cdef Py_ssize_t r = Gv.shape[1], a, b
    cdef double[::1] g = np.empty(r), rhs = np.empty(r)
    cdef double[:, ::1] H = np.empty((r, r))
    out = np.empty(r)
    cdef double[::1] x = out
    cdef double val, s
    cdef bint ok
    with nogil:
        val = _terms(Gv, lv, eps, g, H, True)
        for a in range(r):
            s = (rho * deg + 1.0) * lv[a]
            for b in range(r):
                s += H[a, b] * lv[b]
            rhs[a] = s + rho * nb[a] + et[a] - g[a]
        for a in range(r):
            H[a, a] += 2.0 * rho * deg + 1.0
        ok = _chol_solve(H, rhs, x)
    if not ok:
        raise np.linalg.LinAlgError("MAOM node system is not positive definite")
    return out, val


cdef inline double _row_norm(const double[:, ::1] H, Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t j
    cdef double s = 0.0
    for j in range(H.shape[1]):
        s += H[i, j] * H[i, j]
    return sqrt(s)


def pcm_edges(lam_l, lam_r, v_l, v_r, double rho, double eta):
    cdef const double[:, ::1] Ll = np.ascontiguousarray(lam_l, dtype=float)
    cdef const double[:, ::1] Lr = np.ascontiguousarray(lam_r, dtype=float)
    cdef const double[:, ::1] Vl = np.ascontiguousarray(v_l, dtype=float)
    cdef const double[:, ::1] Vr = np.ascontiguousarray(v_r, dtype=float)
    cdef Py_ssize_t m = Ll.shape[0], r = Ll.shape[1], i, j
    out_l = np.empty((m, r))
    out_r = np.empty((m, r))
    cdef double[:, ::1] cl = out_l, cr = out_r
    cdef double s, h, nrm, omega, a, b
    with nogil:
        for i in range(m):
            s = 0.0
            for j in range(r):
                h = rho * Ll[i, j] - rho * Lr[i, j] + Vl[i, j] - Vr[i, j]
                s += h * h
            nrm = sqrt(s)
            omega = 0.5
            if nrm > 0.0:
                omega = 1.0 - eta / nrm
                if omega < 0.5:
                    omega = 0.5
            for j in range(r):
                a = Ll[i, j] + Vl[i, j] / rho
                b = Lr[i, j] + Vr[i, j] / rho
                cl[i, j] = omega * a + (1.0 - omega) * b
                cr[i, j] = (1.0 - omega) * a + omega * b
    return out_l, out_r


def soft_threshold_rows(H, double t):
    cdef const double[:, ::1] Hv = np.ascontiguousarray(H, dtype=float)
    cdef Py_ssize_t m = Hv.shape[0], r = Hv.shape[1], i, j
    out = np.empty((m, r))
    cdef double[:, ::1] o = out
    cdef double nrm, f
    with nogil:
        for i in range(m):
            nrm = _row_norm(Hv, i)
            f = 0.0
            if nrm > t:
                f = 1.0 - t / nrm
            for j in range(r):
                o[i, j] = f * Hv[i, j]
    return out


def maom_edges(lam_l, lam_r, T, double rho, double eta):
    cdef const double[:, ::1] Ll = np.ascontiguousarray(lam_l, dtype=float)
    cdef const double[:, ::1] Lr = np.ascontiguousarray(lam_r, dtype=float)
    cdef const double[:, ::1] Tv = np.ascontiguousarray(T, dtype=float)
    cdef Py_ssize_t m = Ll.shape[0], r = Ll.shape[1], i, j
    h = np.empty((m, r))
    cdef double[:, ::1] hv = h
    with nogil:
        for i in range(m):
            for j in range(r):
                hv[i, j] = Ll[i, j] - Lr[i, j] + Tv[i, j] / rho
    return soft_threshold_rows(h, eta / rho)
