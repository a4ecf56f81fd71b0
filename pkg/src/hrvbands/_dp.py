"""Compiled kernels for the optimal-partition dynamic program."""
import numba
import numpy as np

TIE_RTOL = 1e-12


@numba.njit(cache=True, inline="always")
def _cost(c1, c2, s, t, floor):
    n = t - s
    s1 = c1[t] - c1[s]
    v = (c2[t] - c2[s] - s1 * s1 / n) / n
    if v < floor:
        v = floor
    return n * np.log(v) + n


@numba.njit(cache=True)
def suffix_table(c1, c2, kmax, m, floor):
    """
    ``G[s, k]``: minimal total contrast of ``[s, n)`` cut into ``k``
    segments of length >= ``m``; ``inf`` when infeasible. Column 0 unused.
    """
    n = len(c1) - 1
    G = np.full((n + 1, kmax + 1), np.inf)
    for s in range(n - m, -1, -1):
        row = G[s]
        for t in range(s + m, n + 1):
            c = _cost(c1, c2, s, t, floor)
            if t == n:
                row[1] = c
            else:
                nxt = G[t]
                for k in range(2, kmax + 1):
                    v = c + nxt[k - 1]
                    if v < row[k]:
                        row[k] = v
    return G


@numba.njit(cache=True)
def backtrack(c1, c2, G, K, m, floor):
    """Smallest admissible change points attaining ``G[0, K]``."""
    n = len(c1) - 1
    tau = np.empty(K - 1, dtype=np.int64)
    s = 0
    for j in range(K - 1):
        k = K - j
        target = G[s, k]
        tol = TIE_RTOL * max(1.0, abs(target))
        best = -1
        for t in range(s + m, n - (k - 1) * m + 1):
            v = _cost(c1, c2, s, t, floor) + G[t, k - 1]
            if v <= target + tol:
                best = t
                break
        if best < 0:
            # unreachable when G came from suffix_table
            best = s + m
            bv = np.inf
            for t in range(s + m, n - (k - 1) * m + 1):
                v = _cost(c1, c2, s, t, floor) + G[t, k - 1]
                if v < bv:
                    bv = v
                    best = t
        tau[j] = best
        s = best
    return tau
