"""Pure-numpy reference kernels.

Same contracts as :mod:`lggd._kernels_numba`; selected via the
``LGGD_BACKEND`` environment variable (see :mod:`lggd.backend`).
Graphs are CSR: ``indptr`` (n+1,), ``indices`` (nnz,), ``csqrt`` (nnz,)
holding sqrt(w) per directed edge copy.
"""

from collections import deque

import numpy as np


def _edge_sources(indptr):
    n = indptr.shape[0] - 1
    return np.repeat(np.arange(n, dtype=np.int64), np.diff(indptr))


def grad_norm(indptr, indices, csqrt, f, p_inf):
    """Per-node L_p norm of the descent-direction gradient, rowwise over f (K, n)."""
    f = np.atleast_2d(f)
    K, n = f.shape
    out = np.zeros((K, n))
    src = _edge_sources(indptr)
    for k in range(K):
        drop = csqrt * np.maximum(f[k, src] - f[k, indices], 0.0)
        if p_inf:
            np.maximum.at(out[k], src, drop)
        else:
            np.add.at(out[k], src, drop)
    return out


def grad_norm_vjp(indptr, indices, csqrt, f, g, p_inf):
    """Accumulate d(sum g*grad_norm)/df. Kink subgradient is 0 at ties."""
    f = np.atleast_2d(f)
    g = np.atleast_2d(g)
    K, n = f.shape
    df = np.zeros((K, n))
    src = _edge_sources(indptr)
    for k in range(K):
        diff = f[k, src] - f[k, indices]
        if p_inf:
            # only the first maximal strictly-descending edge per node carries gradient
            drop = csqrt * np.maximum(diff, 0.0)
            for i in range(n):
                lo, hi = indptr[i], indptr[i + 1]
                if lo == hi:
                    continue
                e = lo + int(np.argmax(drop[lo:hi]))
                if diff[e] > 0.0:
                    df[k, i] += csqrt[e] * g[k, i]
                    df[k, indices[e]] -= csqrt[e] * g[k, i]
        else:
            active = diff > 0.0
            contrib = np.where(active, csqrt * g[k, src], 0.0)
            np.add.at(df[k], src, contrib)
            np.subtract.at(df[k], indices, contrib)
    return df


def rk4_stages(indptr, indices, csqrt, rho, f, h, p_inf):
    """One classic RK4 step of df/dt = 1 - rho*grad_norm(f), fused.

    Returns (f_new, s2, s3, s4) where s2..s4 are the stage states needed to
    replay the step in reverse mode.
    """
    k1 = 1.0 - rho * grad_norm(indptr, indices, csqrt, f, p_inf)
    s2 = f + 0.5 * h * k1
    k2 = 1.0 - rho * grad_norm(indptr, indices, csqrt, s2, p_inf)
    s3 = f + 0.5 * h * k2
    k3 = 1.0 - rho * grad_norm(indptr, indices, csqrt, s3, p_inf)
    s4 = f + h * k3
    k4 = 1.0 - rho * grad_norm(indptr, indices, csqrt, s4, p_inf)
    f_new = f + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return f_new, s2, s3, s4


def rk4_step_vjp(indptr, indices, csqrt, rho, f, s2, s3, s4, h, p_inf, gbar):
    """Reverse-mode of rk4_stages: seeds gbar on f_new, returns (df, drho)."""
    g1 = grad_norm(indptr, indices, csqrt, f, p_inf)
    g2 = grad_norm(indptr, indices, csqrt, s2, p_inf)
    g3 = grad_norm(indptr, indices, csqrt, s3, p_inf)
    g4 = grad_norm(indptr, indices, csqrt, s4, p_inf)
    kbar4 = (h / 6.0) * gbar
    drho = -(kbar4 * g4).sum(axis=0)
    sbar4 = -grad_norm_vjp(indptr, indices, csqrt, s4, rho * kbar4, p_inf)
    kbar3 = (h / 3.0) * gbar + h * sbar4
    drho -= (kbar3 * g3).sum(axis=0)
    sbar3 = -grad_norm_vjp(indptr, indices, csqrt, s3, rho * kbar3, p_inf)
    kbar2 = (h / 3.0) * gbar + 0.5 * h * sbar3
    drho -= (kbar2 * g2).sum(axis=0)
    sbar2 = -grad_norm_vjp(indptr, indices, csqrt, s2, rho * kbar2, p_inf)
    kbar1 = (h / 6.0) * gbar + 0.5 * h * sbar2
    drho -= (kbar1 * g1).sum(axis=0)
    df = (gbar + sbar4 + sbar3 + sbar2
          - grad_norm_vjp(indptr, indices, csqrt, f, rho * kbar1, p_inf))
    return df, drho


def _local_solve_p1(a, c, rhs):
    order = np.argsort(a, kind="stable")
    a = a[order]
    c = c[order]
    csum = 0.0
    casum = 0.0
    m = a.shape[0]
    for k in range(m):
        csum += c[k]
        casum += c[k] * a[k]
        t = (rhs + casum) / csum
        if k == m - 1 or t <= a[k + 1]:
            return t
    return (rhs + casum) / csum


def gauss_seidel_sweep(indptr, indices, csqrt, f, rhs, update_mask, p_inf):
    """One in-place Gauss-Seidel sweep in node-index order; returns max |update|."""
    n = f.shape[0]
    max_change = 0.0
    for i in range(n):
        if not update_mask[i]:
            continue
        lo, hi = indptr[i], indptr[i + 1]
        if lo == hi:
            continue
        a = f[indices[lo:hi]]
        c = csqrt[lo:hi]
        if p_inf:
            t = np.min(a + rhs[i] / c)
        else:
            t = _local_solve_p1(a, c, rhs[i])
        change = abs(t - f[i])
        if change > max_change:
            max_change = change
        f[i] = t
    return max_change


def hop_distances(indptr, indices, sources, cap):
    """Multi-source BFS hop counts; unreachable nodes get cap."""
    n = indptr.shape[0] - 1
    dist = np.full(n, cap)
    q = deque()
    for s in sources:
        dist[s] = 0.0
        q.append(int(s))
    while q:
        i = q.popleft()
        d = dist[i] + 1.0
        for e in range(indptr[i], indptr[i + 1]):
            j = int(indices[e])
            if dist[j] > d:
                dist[j] = d
                q.append(j)
    return dist
