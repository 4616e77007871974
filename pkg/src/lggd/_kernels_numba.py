"""Numba-jitted hot kernels.

Contracts match :mod:`lggd._kernels_numpy` exactly; the two backends must
be numerically identical (same summation order per node).
"""

import numba as nb
import numpy as np

_jit = {"cache": True, "nogil": True}


@nb.njit(**_jit)
def grad_norm(indptr, indices, csqrt, f, p_inf):
    K, n = f.shape
    out = np.zeros((K, n))
    for k in range(K):
        for i in range(n):
            acc = 0.0
            for e in range(indptr[i], indptr[i + 1]):
                d = f[k, i] - f[k, indices[e]]
                if d > 0.0:
                    v = csqrt[e] * d
                    if p_inf:
                        if v > acc:
                            acc = v
                    else:
                        acc += v
            out[k, i] = acc
    return out


@nb.njit(**_jit)
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


@nb.njit(**_jit)
def grad_norm_vjp(indptr, indices, csqrt, f, g, p_inf):
    K, n = f.shape
    df = np.zeros((K, n))
    for k in range(K):
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            if lo == hi:
                continue
            if p_inf:
                best = -1
                best_v = 0.0
                for e in range(lo, hi):
                    d = f[k, i] - f[k, indices[e]]
                    if d > 0.0:
                        v = csqrt[e] * d
                        if v > best_v:
                            best_v = v
                            best = e
                if best >= 0:
                    df[k, i] += csqrt[best] * g[k, i]
                    df[k, indices[best]] -= csqrt[best] * g[k, i]
            else:
                for e in range(lo, hi):
                    if f[k, i] - f[k, indices[e]] > 0.0:
                        df[k, i] += csqrt[e] * g[k, i]
                        df[k, indices[e]] -= csqrt[e] * g[k, i]
    return df


@nb.njit(**_jit)
def rk4_step_vjp(indptr, indices, csqrt, rho, f, s2, s3, s4, h, p_inf, gbar):
    """Reverse-mode of rk4_stages: seeds gbar on f_new, returns (df, drho)."""
    K, n = f.shape
    g1 = grad_norm(indptr, indices, csqrt, f, p_inf)
    g2 = grad_norm(indptr, indices, csqrt, s2, p_inf)
    g3 = grad_norm(indptr, indices, csqrt, s3, p_inf)
    g4 = grad_norm(indptr, indices, csqrt, s4, p_inf)
    drho = np.zeros(n)
    kbar4 = (h / 6.0) * gbar
    for k in range(K):
        for i in range(n):
            drho[i] -= kbar4[k, i] * g4[k, i]
    sbar4 = -grad_norm_vjp(indptr, indices, csqrt, s4, rho * kbar4, p_inf)
    kbar3 = (h / 3.0) * gbar + h * sbar4
    for k in range(K):
        for i in range(n):
            drho[i] -= kbar3[k, i] * g3[k, i]
    sbar3 = -grad_norm_vjp(indptr, indices, csqrt, s3, rho * kbar3, p_inf)
    kbar2 = (h / 3.0) * gbar + 0.5 * h * sbar3
    for k in range(K):
        for i in range(n):
            drho[i] -= kbar2[k, i] * g2[k, i]
    sbar2 = -grad_norm_vjp(indptr, indices, csqrt, s2, rho * kbar2, p_inf)
    kbar1 = (h / 6.0) * gbar + 0.5 * h * sbar2
    df = (gbar + sbar4 + sbar3 + sbar2
          - grad_norm_vjp(indptr, indices, csqrt, f, rho * kbar1, p_inf))
    for k in range(K):
        for i in range(n):
            drho[i] -= kbar1[k, i] * g1[k, i]
    return df, drho


@nb.njit(**_jit)
def _local_solve_p1(a, c, rhs):
    order = np.argsort(a)
    csum = 0.0
    casum = 0.0
    m = a.shape[0]
    t = 0.0
    for k in range(m):
        e = order[k]
        csum += c[e]
        casum += c[e] * a[e]
        t = (rhs + casum) / csum
        if k == m - 1 or t <= a[order[k + 1]]:
            return t
    return t


@nb.njit(**_jit)
def gauss_seidel_sweep(indptr, indices, csqrt, f, rhs, update_mask, p_inf):
    n = f.shape[0]
    max_change = 0.0
    for i in range(n):
        if not update_mask[i]:
            continue
        lo, hi = indptr[i], indptr[i + 1]
        if lo == hi:
            continue
        if p_inf:
            t = f[indices[lo]] + rhs[i] / csqrt[lo]
            for e in range(lo + 1, hi):
                v = f[indices[e]] + rhs[i] / csqrt[e]
                if v < t:
                    t = v
        else:
            t = _local_solve_p1(f[indices[lo:hi]], csqrt[lo:hi], rhs[i])
        change = abs(t - f[i])
        if change > max_change:
            max_change = change
        f[i] = t
    return max_change


@nb.njit(**_jit)
def hop_distances(indptr, indices, sources, cap):
    n = indptr.shape[0] - 1
    dist = np.full(n, cap)
    queue = np.empty(n, dtype=np.int64)
    head = 0
    tail = 0
    for s in sources:
        dist[s] = 0.0
        queue[tail] = s
        tail += 1
    while head < tail:
        i = queue[head]
        head += 1
        d = dist[i] + 1.0
        for e in range(indptr[i], indptr[i + 1]):
            j = indices[e]
            if dist[j] > d:
                dist[j] = d
                if tail < n:
                    queue[tail] = j
                    tail += 1
    return dist
