"""Pure-Python implementations of the numeric hot spots.

Used when the compiled ``_accel`` extension is unavailable, and as the
reference the extension is tested against. Keep the two in lockstep.
"""

import numpy as np
from scipy.linalg import solve_triangular


def average_ranks(x):
    """1-based ranks of ``x`` with ties given the mean of the ranks they span."""
    x = np.asarray(x, dtype=float)
    n = x.size
    order = np.argsort(x, kind="mergesort")
    xs = x[order]
    starts = np.flatnonzero(np.r_[True, xs[1:] != xs[:-1]])
    ends = np.r_[starts[1:], n]
    ranks = np.empty(n)
    ranks[order] = np.repeat(0.5 * (starts + ends - 1) + 1.0, ends - starts)
    return ranks


def _pair_step(bi, bj, gi, gj, eta, eps, C):
    """Optimal step ``t >= 0`` for ``beta_i += t, beta_j -= t``.

    The one-dimensional objective is concave and piecewise quadratic, with
    kinks where either coefficient crosses zero. Returns the step plus flags
    telling the caller which coordinate landed exactly on a kink or bound.
    """
    tmax = min(C - bi, bj + C)
    kinks = []
    if bi < 0.0 and -bi < tmax:
        kinks.append((-bi, 1))
    if bj > 0.0 and bj < tmax:
        kinks.append((bj, 2))
    kinks.sort()
    kinks.append((tmax, 3))

    a = 0.0
    si = 1.0 if bi >= 0.0 else -1.0
    sj = 1.0 if bj > 0.0 else -1.0
    for b, which in kinks:
        d0 = (gi - gj) - eps * si + eps * sj
        if d0 - eta * a <= 0.0:
            return a, 0
        if eta > 0.0:
            t = d0 / eta
            if t < b:
                return t, 0
        if which == 1:
            si = 1.0
        elif which == 2:
            sj = -1.0
        a = b
        if which == 3:
            return b, 3
    return a, 0


def _working_pair(beta, g, eps, C):
    up = np.where(beta < C, g - eps * np.where(beta >= 0.0, 1.0, -1.0), -np.inf)
    dn = np.where(beta > -C, g + eps * np.where(beta <= 0.0, 1.0, -1.0), np.inf)
    i = int(np.argmax(up))
    j = int(np.argmin(dn))
    return i, j, up[i], dn[j]


def svr_smo(K, y, C, eps, tol, max_iter, beta0=None):
    """Pairwise coordinate ascent on the epsilon-SVR dual.

    Maximises ``-0.5 b'Kb - eps*|b|_1 + y'b`` subject to ``sum(b) == 0`` and
    ``|b_i| <= C`` where ``b = alpha - alpha*``. Each update moves the most
    KKT-violating pair, preserving the equality constraint exactly.

    Returns ``(beta, bias, converged, iterations)``.
    """
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.size
    beta = np.zeros(n) if beta0 is None else np.array(beta0, dtype=float)
    g = y - K @ beta
    converged = False
    it = 0
    while it < max_iter:
        i, j, up, dn = _working_pair(beta, g, eps, C)
        if up - dn < tol:
            converged = True
            break
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta < 0.0:
            eta = 0.0
        t, hit = _pair_step(beta[i], beta[j], g[i], g[j], eta, eps, C)
        new_i = beta[i] + t
        new_j = beta[j] - t
        if hit == 3:
            if C - beta[i] <= beta[j] + C:
                new_i = C
            else:
                new_j = -C
        # land exactly on zero when the step stopped at a kink
        if beta[i] < 0.0 and t == -beta[i]:
            new_i = 0.0
        if beta[j] > 0.0 and t == beta[j]:
            new_j = 0.0
        di = new_i - beta[i]
        dj = new_j - beta[j]
        beta[i] = new_i
        beta[j] = new_j
        g -= K[:, i] * di + K[:, j] * dj
        it += 1

    i, j, up, dn = _working_pair(beta, g, eps, C)
    if np.isfinite(up) and np.isfinite(dn):
        bias = 0.5 * (up + dn)
    elif np.isfinite(up):
        bias = up
    elif np.isfinite(dn):
        bias = dn
    else:
        bias = 0.0
    return beta, float(bias), converged, it


def kernel_posterior(K, obs, diag_add, resid, targets, want_var=True):
    """Kernel-regression posterior at ``targets`` given observations ``obs``.

    Solves ``(K[obs, obs] + diag(diag_add)) a = resid`` by Cholesky and
    returns ``(K[targets, obs] @ a, K[t, t] - k_t' (K_oo + D)^-1 k_t)``; the
    second item is ``None`` unless ``want_var``. Returns ``None`` when the
    matrix is not numerically positive definite, so the caller can add
    jitter and retry.
    """
    A = K[np.ix_(obs, obs)]
    A[np.diag_indices_from(A)] += diag_add
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        return None
    Ks = K[np.ix_(obs, targets)]
    w = solve_triangular(L, resid, lower=True, check_finite=False)
    a = solve_triangular(L.T, w, lower=False, check_finite=False)
    mean = Ks.T @ a
    if not want_var:
        return mean, None
    v = solve_triangular(L, Ks, lower=True, check_finite=False)
    var = K[targets, targets] - np.einsum("ij,ij->j", v, v)
    return mean, var
