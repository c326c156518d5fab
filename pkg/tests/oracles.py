"""Naive reference implementations of every kernel, written directly from the
defining sums with explicit loops.  Deliberately slow and independent of the
package's fast paths; only usable for tiny instances.
"""

import itertools

import numpy as np


def naive_gram(values):
    """U[s, t] = sum_{i != j} X_i,s . X_j,t by the double subject loop."""
    n, T, p = values.shape
    u = np.zeros((T, T))
    for s in range(T):
        for t in range(T):
            acc = 0.0
            for i in range(n):
                for j in range(n):
                    if i != j:
                        acc += values[i, s] @ values[j, t]
            u[s, t] = acc
    return u


def naive_mean_scan(values):
    """M_hat at every split by the quadruple time/subject loops."""
    n, T, p = values.shape
    out = np.zeros(T - 1)
    for t in range(1, T):
        h = t * (T - t)
        acc = 0.0
        for s1 in range(t):
            for s2 in range(t, T):
                for i in range(n):
                    for j in range(n):
                        if i == j:
                            continue
                        acc += (
                            values[i, s1] @ values[j, s1]
                            + values[i, s2] @ values[j, s2]
                            - 2.0 * (values[i, s1] @ values[j, s2])
                        )
        out[t - 1] = acc / (h * n * (n - 1))
    return out


def naive_pair_profiles(values):
    """D_ij(t) by its literal four-fold sum; shape (T-1, n, n)."""
    n, T, p = values.shape
    d = np.zeros((T - 1, n, n))
    for t in range(1, T):
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                acc = 0.0
                for r1 in range(t):
                    for r2 in range(t, T):
                        times = (r1, r2)
                        for a in (0, 1):
                            for b in (0, 1):
                                sign = -1.0 if a != b else 1.0
                                acc += sign * (values[i, times[a]] @ values[j, times[b]])
                d[t - 1, i, j] = acc
    return d


def naive_variance_pairwise(values):
    """Pairwise null-variance estimate at every split from naive D."""
    n, T, p = values.shape
    d = naive_pair_profiles(values)
    out = np.zeros(T - 1)
    for t in range(1, T):
        h = t * (T - t)
        acc = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    acc += d[t - 1, i, j] ** 2
        out[t - 1] = 2.0 * acc / (h**2 * n**2 * (n - 1) ** 2)
    return out


def naive_variance_ustat(values):
    """Quadruple null-variance estimate at every split by full enumeration.

    Every ordered 4-tuple of distinct subjects is visited; for each, the
    four-term trace summand is integrated over all (pre, post) x (pre, post)
    time tuples via an explicit outer product, transcribing the defining sum
    with its (a, b) / (c, d) sign expansions written out.
    """
    n, T, p = values.shape
    # w[u, v, s, t] = X_u,s . X_v,t
    w = np.einsum("usk,vtk->uvst", values, values)
    # f[u, v, r1, r2] = the (a, b) sign expansion for the ordered pair (u, v)
    diag = np.einsum("uvss->uvs", w)
    f = diag[:, :, :, None] + diag[:, :, None, :] - w - np.swapaxes(w, 2, 3)
    p4 = n * (n - 1) * (n - 2) * (n - 3)
    out = np.zeros(T - 1)
    for t in range(1, T):
        h = t * (T - t)
        total = 0.0
        for i, j, k, l in itertools.permutations(range(n), 4):
            first = f[i, j, :t, t:]
            total += (
                np.multiply.outer(first, f[i, j, :t, t:]).sum()
                - np.multiply.outer(first, f[i, k, :t, t:]).sum()
                - np.multiply.outer(first, f[k, j, :t, t:]).sum()
                + np.multiply.outer(first, f[k, l, :t, t:]).sum()
            )
        out[t - 1] = 2.0 * total / (h**2 * n * (n - 1) * p4)
    return out


def naive_population_scan(mu):
    """Population M_t over all splits by the double time loop."""
    T = mu.shape[0]
    out = np.zeros(T - 1)
    for t in range(1, T):
        acc = 0.0
        for s1 in range(t):
            for s2 in range(t, T):
                diff = mu[s1] - mu[s2]
                acc += diff @ diff
        out[t - 1] = acc / (t * (T - t))
    return out


def profile_scale(arr):
    """Reference magnitude for relative-error comparisons over a profile."""
    scale = np.max(np.abs(arr))
    return scale if scale > 0 else 1.0
