# cython: language_level=3
"""Compiled versions of the kernels in ``_pykernels.py``.

``sinkhorn_log`` produces the same iterates as the NumPy version but keeps
the potentials split as ``f = f_abs + eps * log(u)``: sweeps update the
scalings ``u, v`` against a cached stabilized kernel, and the scalings are
absorbed back into ``f_abs, g_abs`` (one ``exp`` per matrix entry) only when
they leave ``[SMALL, BIG]`` or a row/column sum underflows. Reductions run in
a fixed serial order, so results do not depend on scheduling.
"""

import numpy as np

from libc.math cimport exp, expm1, log, fabs, isfinite, INFINITY

cdef double BIG = 1e50
cdef double SMALL = 1e-50


def sq_euclidean(const double[:, ::1] x, const double[:, ::1] y):
    cdef Py_ssize_t n = x.shape[0], m = y.shape[0], i, j
    cdef double d0, d1
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] c = out
    for i in range(n):
        for j in range(m):
            d0 = x[i, 0] - y[j, 0]
            d1 = x[i, 1] - y[j, 1]
            c[i, j] = d0 * d0 + d1 * d1
    return out


cdef void _build_kernel(const double[:, ::1] C, const double[::1] log_a, const double[::1] log_b,
                        const double[::1] f, const double[::1] g, double inv,
                        double[:, ::1] K) noexcept nogil:
    # K[i, j] = a_i b_j exp((f_i + g_j - C_ij) / eps)
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j
    cdef double fi
    for i in range(n):
        fi = log_a[i] + f[i] * inv
        for j in range(m):
            K[i, j] = exp(fi + log_b[j] + (g[j] - C[i, j]) * inv)


cdef void _absorb(double[::1] pot, double[::1] scale, double eps) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(pot.shape[0]):
        pot[i] += eps * log(scale[i])
        scale[i] = 1.0


cdef void _lse_rows(const double[:, ::1] C, const double[::1] log_b, const double[::1] g,
                    double inv, double eps, double[::1] out) noexcept nogil:
    # out_i = -eps * log sum_j b_j exp((g_j - C_ij) / eps)
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j
    cdef double mx, s, v
    for i in range(n):
        mx = -INFINITY
        for j in range(m):
            v = log_b[j] + (g[j] - C[i, j]) * inv
            if v > mx:
                mx = v
        s = 0.0
        for j in range(m):
            s += exp(log_b[j] + (g[j] - C[i, j]) * inv - mx)
        out[i] = -eps * (mx + log(s))


cdef void _lse_cols(const double[:, ::1] C, const double[::1] log_a, const double[::1] f,
                    double inv, double eps, double[::1] mx, double[::1] s,
                    double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j
    cdef double v, fi
    for j in range(m):
        mx[j] = -INFINITY
        s[j] = 0.0
    for i in range(n):
        fi = log_a[i] + f[i] * inv
        for j in range(m):
            v = fi - C[i, j] * inv
            if v > mx[j]:
                mx[j] = v
    for i in range(n):
        fi = log_a[i] + f[i] * inv
        for j in range(m):
            s[j] += exp(fi - C[i, j] * inv - mx[j])
    for j in range(m):
        out[j] = -eps * (mx[j] + log(s[j]))


cdef bint _row_sums(const double[:, ::1] K, const double[::1] v, double[::1] s) noexcept nogil:
    """s = K v; False if any entry is zero or non-finite."""
    cdef Py_ssize_t n = K.shape[0], m = K.shape[1], i, j
    cdef double acc
    cdef bint ok = True
    for i in range(n):
        acc = 0.0
        for j in range(m):
            acc += K[i, j] * v[j]
        s[i] = acc
        if not (acc > 0.0 and isfinite(acc)):
            ok = False
    return ok


cdef bint _col_sums(const double[:, ::1] K, const double[::1] u, double[::1] t) noexcept nogil:
    """t = K^T u; False if any entry is zero or non-finite."""
    cdef Py_ssize_t n = K.shape[0], m = K.shape[1], i, j
    cdef double ui
    cdef bint ok = True
    for j in range(m):
        t[j] = 0.0
    for i in range(n):
        ui = u[i]
        for j in range(m):
            t[j] += K[i, j] * ui
    for j in range(m):
        if not (t[j] > 0.0 and isfinite(t[j])):
            ok = False
    return ok


cdef bint _out_of_range(const double[::1] x) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        if x[i] > BIG or x[i] < SMALL:
            return True
    return False


def sinkhorn_log(const double[:, ::1] C, const double[::1] log_a, const double[::1] log_b,
                 double eps, double tol, Py_ssize_t max_iter,
                 double[::1] f, double[::1] g, double[::1] history):
    cdef Py_ssize_t n = C.shape[0], m = C.shape[1], i, j, it
    cdef Py_ssize_t done = max_iter
    cdef double inv = 1.0 / eps, res, r
    cdef bint ok

    K_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] K = K_arr
    u_arr = np.ones(n)
    v_arr = np.ones(m)
    s_arr = np.empty(n)
    t_arr = np.empty(m)
    fn_arr = np.empty(n)
    mx_arr = np.empty(m)
    sc_arr = np.empty(m)
    cdef double[::1] u = u_arr
    cdef double[::1] v = v_arr
    cdef double[::1] s = s_arr
    cdef double[::1] t = t_arr
    cdef double[::1] f_new = fn_arr
    cdef double[::1] mx = mx_arr
    cdef double[::1] sc = sc_arr
    cdef double[::1] a = np.exp(np.asarray(log_a))
    cdef double[::1] b = np.exp(np.asarray(log_b))

    with nogil:
        _build_kernel(C, log_a, log_b, f, g, inv, K)
        for it in range(max_iter + 1):
            # row half-sweep; f itself is only touched on absorption
            ok = _row_sums(K, v, s)
            if not ok:
                _absorb(f, u, eps)
                _absorb(g, v, eps)
                _build_kernel(C, log_a, log_b, f, g, inv, K)
                ok = _row_sums(K, v, s)
            if ok:
                res = 0.0
                for i in range(n):
                    r = fabs(u[i] * s[i] - a[i])
                    if r > res:
                        res = r
                history[it] = res
                if it == max_iter or (it > 0 and res <= tol):
                    done = it
                    break
                for i in range(n):
                    u[i] = a[i] / s[i]
            else:
                # kernel underflowed for some row even after absorption: exact log update
                _lse_rows(C, log_b, g, inv, eps, f_new)
                res = 0.0
                for i in range(n):
                    r = fabs(a[i] * expm1((f[i] - f_new[i]) * inv))
                    if r > res:
                        res = r
                history[it] = res
                if it == max_iter or (it > 0 and res <= tol):
                    done = it
                    break
                for i in range(n):
                    f[i] = f_new[i]
                _build_kernel(C, log_a, log_b, f, g, inv, K)

            # column half-sweep
            ok = _col_sums(K, u, t)
            if not ok:
                _absorb(f, u, eps)
                _absorb(g, v, eps)
                _build_kernel(C, log_a, log_b, f, g, inv, K)
                ok = _col_sums(K, u, t)
            if ok:
                for j in range(m):
                    v[j] = b[j] / t[j]
            else:
                _lse_cols(C, log_a, f, inv, eps, mx, sc, g)
                _build_kernel(C, log_a, log_b, f, g, inv, K)

            if _out_of_range(u) or _out_of_range(v):
                _absorb(f, u, eps)
                _absorb(g, v, eps)
                _build_kernel(C, log_a, log_b, f, g, inv, K)

        _absorb(f, u, eps)
        _absorb(g, v, eps)
    return done
