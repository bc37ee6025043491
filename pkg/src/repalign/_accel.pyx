# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the numeric hot spots in ``_accel_py``.

Same algorithms, same tie-breaking, same return conventions; the test
suite runs both and requires agreement.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY, isfinite, sqrt

cnp.import_array()


def average_ranks(x):
    cdef cnp.ndarray[cnp.float64_t, ndim=1] xa = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = xa.shape[0]
    cdef cnp.ndarray[cnp.intp_t, ndim=1] order = np.argsort(xa, kind="mergesort")
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ranks = np.empty(n, dtype=np.float64)
    cdef Py_ssize_t start = 0, end, k
    cdef double r
    while start < n:
        end = start + 1
        while end < n and xa[order[end]] == xa[order[start]]:
            end += 1
        r = 0.5 * (start + end - 1) + 1.0
        for k in range(start, end):
            ranks[order[k]] = r
        start = end
    return ranks


cdef inline void _working_pair(double[::1] beta, double[::1] g, double eps,
                               double C, Py_ssize_t n, Py_ssize_t* i_out,
                               Py_ssize_t* j_out, double* up_out,
                               double* dn_out) noexcept nogil:
    cdef Py_ssize_t k
    cdef double up = -INFINITY, dn = INFINITY, v
    cdef Py_ssize_t i = 0, j = 0
    for k in range(n):
        if beta[k] < C:
            v = g[k] - eps if beta[k] >= 0.0 else g[k] + eps
            if v > up:
                up = v
                i = k
        if beta[k] > -C:
            v = g[k] + eps if beta[k] <= 0.0 else g[k] - eps
            if v < dn:
                dn = v
                j = k
    i_out[0] = i
    j_out[0] = j
    up_out[0] = up
    dn_out[0] = dn


cdef inline double _pair_step(double bi, double bj, double gi, double gj,
                              double eta, double eps, double C,
                              int* hit) noexcept nogil:
    cdef double tmax = C - bi
    cdef double kb[3]
    cdef int kw[3]
    cdef int nk = 0, m
    cdef double a = 0.0, b, d0, t, si, sj
    if bj + C < tmax:
        tmax = bj + C
    if bi < 0.0 and -bi < tmax:
        kb[nk] = -bi
        kw[nk] = 1
        nk += 1
    if bj > 0.0 and bj < tmax:
        kb[nk] = bj
        kw[nk] = 2
        nk += 1
    if nk == 2 and kb[1] < kb[0]:
        kb[0], kb[1] = kb[1], kb[0]
        kw[0], kw[1] = kw[1], kw[0]
    kb[nk] = tmax
    kw[nk] = 3
    nk += 1

    si = 1.0 if bi >= 0.0 else -1.0
    sj = 1.0 if bj > 0.0 else -1.0
    hit[0] = 0
    for m in range(nk):
        b = kb[m]
        d0 = (gi - gj) - eps * si + eps * sj
        if d0 - eta * a <= 0.0:
            return a
        if eta > 0.0:
            t = d0 / eta
            if t < b:
                return t
        if kw[m] == 1:
            si = 1.0
        elif kw[m] == 2:
            sj = -1.0
        a = b
        if kw[m] == 3:
            hit[0] = 3
            return b
    return a


def svr_smo(K, y, double C, double eps, double tol, Py_ssize_t max_iter,
            beta0=None):
    cdef const double[:, ::1] Km = np.ascontiguousarray(K, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ya = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = ya.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] beta_a
    if beta0 is None:
        beta_a = np.zeros(n, dtype=np.float64)
    else:
        beta_a = np.array(beta0, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] g_a = ya - np.asarray(Km) @ beta_a
    cdef double[::1] beta = beta_a
    cdef double[::1] g = g_a
    cdef Py_ssize_t it = 0, i, j, k
    cdef double up, dn, eta, t, new_i, new_j, di, dj, bias
    cdef int hit
    cdef bint converged = False
    with nogil:
        while it < max_iter:
            _working_pair(beta, g, eps, C, n, &i, &j, &up, &dn)
            if up - dn < tol:
                converged = True
                break
            eta = Km[i, i] + Km[j, j] - 2.0 * Km[i, j]
            if eta < 0.0:
                eta = 0.0
            t = _pair_step(beta[i], beta[j], g[i], g[j], eta, eps, C, &hit)
            new_i = beta[i] + t
            new_j = beta[j] - t
            if hit == 3:
                if C - beta[i] <= beta[j] + C:
                    new_i = C
                else:
                    new_j = -C
            if beta[i] < 0.0 and t == -beta[i]:
                new_i = 0.0
            if beta[j] > 0.0 and t == beta[j]:
                new_j = 0.0
            di = new_i - beta[i]
            dj = new_j - beta[j]
            beta[i] = new_i
            beta[j] = new_j
            for k in range(n):
                g[k] -= Km[k, i] * di + Km[k, j] * dj
            it += 1
        _working_pair(beta, g, eps, C, n, &i, &j, &up, &dn)
    if isfinite(up) and isfinite(dn):
        bias = 0.5 * (up + dn)
    elif isfinite(up):
        bias = up
    elif isfinite(dn):
        bias = dn
    else:
        bias = 0.0
    return beta_a, bias, bool(converged), it


def kernel_posterior(K, obs, diag_add, resid, targets, bint want_var=True):
    cdef const double[:, ::1] Km = np.ascontiguousarray(K, dtype=np.float64)
    cdef const cnp.intp_t[::1] o = np.ascontiguousarray(obs, dtype=np.intp)
    cdef const cnp.intp_t[::1] tg = np.ascontiguousarray(targets, dtype=np.intp)
    cdef const double[::1] da = np.ascontiguousarray(
        np.broadcast_to(diag_add, (o.shape[0],)), dtype=np.float64)
    cdef const double[::1] rs = np.ascontiguousarray(resid, dtype=np.float64)
    cdef Py_ssize_t m = o.shape[0], nt = tg.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] L_a = np.zeros((m, m))
    cdef double[:, ::1] L = L_a
    cdef double[::1] w = np.empty(m)
    cdef double[::1] v = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] mean_a = np.empty(nt)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] var_a = np.empty(nt)
    cdef double[::1] mean = mean_a
    cdef double[::1] var = var_a
    cdef Py_ssize_t i, j, k, t
    cdef double s
    cdef bint ok = True
    with nogil:
        # Cholesky-Banachiewicz, lower factor
        for i in range(m):
            for j in range(i + 1):
                s = Km[o[i], o[j]]
                if i == j:
                    s += da[i]
                for k in range(j):
                    s -= L[i, k] * L[j, k]
                if i == j:
                    if not s > 0.0:
                        ok = False
                        break
                    L[i, i] = sqrt(s)
                else:
                    L[i, j] = s / L[j, j]
            if not ok:
                break
        if ok:
            # forward then backward substitution: w = A^-1 resid
            for i in range(m):
                s = rs[i]
                for k in range(i):
                    s -= L[i, k] * w[k]
                w[i] = s / L[i, i]
            for i in range(m - 1, -1, -1):
                s = w[i]
                for k in range(i + 1, m):
                    s -= L[k, i] * w[k]
                w[i] = s / L[i, i]
            for t in range(nt):
                s = 0.0
                for k in range(m):
                    s += Km[tg[t], o[k]] * w[k]
                mean[t] = s
                if want_var:
                    for i in range(m):
                        s = Km[o[i], tg[t]]
                        for k in range(i):
                            s -= L[i, k] * v[k]
                        v[i] = s / L[i, i]
                    s = Km[tg[t], tg[t]]
                    for i in range(m):
                        s -= v[i] * v[i]
                    var[t] = s
    if not ok:
        return None
    return mean_a, (var_a if want_var else None)
