"""Compiled inner loops. Pure functions over float64 arrays."""

import numpy as np
from numba import njit

L1 = 0
MCP = 1


@njit(cache=True)
def _soft(a, b):
    if a > b:
        return a - b
    if a < -b:
        return a + b
    return 0.0


@njit(cache=True)
def _penalty(beta, kind, lam1, mcp_gamma, mcp_scale):
    total = 0.0
    for j in range(beta.shape[0]):
        t = abs(beta[j])
        if kind == L1:
            total += lam1 * t
        else:
            knot = mcp_gamma * lam1 / mcp_scale
            if t <= knot:
                total += lam1 * t - mcp_scale * t * t / (2.0 * mcp_gamma)
            else:
                total += 0.5 * mcp_gamma * lam1 * lam1 / mcp_scale
    return total


@njit(cache=True)
def sls_objective(X, y, G, beta, lam1, lam2, kind, mcp_gamma, mcp_scale):
    r = y - X @ beta
    quad = beta @ (G @ beta)
    return 0.5 * (r @ r) + _penalty(beta, kind, lam1, mcp_gamma, mcp_scale) + 0.5 * lam2 * quad


@njit(cache=True)
def sls_kkt(X, y, G, beta, lam1, lam2):
    """Max stationarity violation of the l1-penalized objective."""
    r = y - X @ beta
    g = -(X.T @ r) + lam2 * (G @ beta)
    worst = 0.0
    for j in range(beta.shape[0]):
        if beta[j] != 0.0:
            v = abs(g[j] + lam1 * np.sign(beta[j]))
        else:
            v = max(0.0, abs(g[j]) - lam1)
        if v > worst:
            worst = v
    return worst


@njit(cache=True, nogil=True)
def sls_coordinate_descent(X, y, G, beta0, lam1, lam2, kind, mcp_gamma, mcp_scale,
                           tol, kkt_tol, max_passes):
    """Cyclic coordinate descent on
    0.5*||y - X b||^2 + pen(b) + 0.5*lam2*b'Gb.

    Stops once a full pass moves the coefficients by less than ``tol`` in
    l1 norm and (for the l1 penalty) the KKT violation is below ``kkt_tol``.
    Returns (beta, passes, converged, objective trace with the starting
    value in slot 0).
    """
    n, p = X.shape
    beta = beta0.copy()
    r = y - X @ beta
    Xt = np.ascontiguousarray(X.T)
    colsq = np.empty(p)
    for j in range(p):
        colsq[j] = Xt[j] @ Xt[j]
    trace = np.empty(max_passes + 1)
    trace[0] = sls_objective(X, y, G, beta, lam1, lam2, kind, mcp_gamma, mcp_scale)
    converged = False
    passes = 0
    for it in range(max_passes):
        delta = 0.0
        for j in range(p):
            old = beta[j]
            d = colsq[j] + lam2 * G[j, j]
            if d <= 0.0:
                new = 0.0
            else:
                cross = 0.0
                for k in range(p):
                    if k != j:
                        cross += G[j, k] * beta[k]
                a = Xt[j] @ r + colsq[j] * old - lam2 * cross
                if kind == L1:
                    new = _soft(a, lam1) / d
                else:
                    if abs(a) <= mcp_gamma * lam1 * d / mcp_scale:
                        new = _soft(a, lam1) / (d - mcp_scale / mcp_gamma)
                    else:
                        new = a / d
            if new != old:
                r -= Xt[j] * (new - old)
                beta[j] = new
                delta += abs(new - old)
        passes = it + 1
        trace[passes] = sls_objective(X, y, G, beta, lam1, lam2, kind, mcp_gamma, mcp_scale)
        if delta < tol:
            if kind != L1 or sls_kkt(X, y, G, beta, lam1, lam2) <= kkt_tol:
                converged = True
                break
    return beta, passes, converged, trace[: passes + 1]


@njit(cache=True, nogil=True)
def lasso_gram_cd(V, b, lam, beta0, tol, max_passes):
    """Coordinate descent for 0.5*b'Vb - b'x + lam*||x||_1 in Gram form.

    ``V`` is the p x p Gram matrix, ``b`` the correlation vector.
    Maintains ``V @ beta`` incrementally. Stops when the largest single
    coordinate move in a pass is below ``tol``.
    """
    p = V.shape[0]
    beta = beta0.copy()
    Vb = V @ beta
    converged = False
    passes = 0
    for it in range(max_passes):
        biggest = 0.0
        for k in range(p):
            vkk = V[k, k]
            if vkk <= 0.0:
                continue
            old = beta[k]
            a = b[k] - Vb[k] + vkk * old
            new = _soft(a, lam) / vkk
            if new != old:
                diff = new - old
                for l in range(p):
                    Vb[l] += V[l, k] * diff
                beta[k] = new
                if abs(diff) > biggest:
                    biggest = abs(diff)
        passes = it + 1
        if biggest < tol:
            converged = True
            break
    return beta, passes, converged


@njit(cache=True, nogil=True)
def glasso_sweep(S, W, B, lam, inner_tol, inner_max):
    """One block-coordinate sweep of the graphical lasso over all columns.

    ``W`` (current covariance estimate) and ``B`` (column-wise lasso
    coefficients, zero diagonal) are updated in place. Returns the number
    of inner subproblems that hit ``inner_max``.
    """
    p = S.shape[0]
    failures = 0
    idx = np.empty(p - 1, dtype=np.int64)
    for j in range(p):
        m = 0
        for k in range(p):
            if k != j:
                idx[m] = k
                m += 1
        V = np.empty((p - 1, p - 1))
        s12 = np.empty(p - 1)
        beta = np.empty(p - 1)
        for a in range(p - 1):
            s12[a] = S[idx[a], j]
            beta[a] = B[idx[a], j]
            for c in range(p - 1):
                V[a, c] = W[idx[a], idx[c]]
        beta, _, ok = lasso_gram_cd(V, s12, lam, beta, inner_tol, inner_max)
        if not ok:
            failures += 1
        w12 = V @ beta
        for a in range(p - 1):
            W[idx[a], j] = w12[a]
            W[j, idx[a]] = w12[a]
            B[idx[a], j] = beta[a]
    return failures


@njit(cache=True)
def precision_from_glasso(W, B):
    """Recover the precision matrix from the converged W and B."""
    p = W.shape[0]
    Theta = np.zeros((p, p))
    for j in range(p):
        acc = 0.0
        for k in range(p):
            if k != j:
                acc += W[j, k] * B[k, j]
        tjj = 1.0 / (W[j, j] - acc)
        Theta[j, j] = tjj
        for k in range(p):
            if k != j:
                Theta[k, j] = -B[k, j] * tjj
    return 0.5 * (Theta + Theta.T)
