"""Numba kernels for exact max-norm neighbour queries over a sorted projection.

Every kernel expects the rows of ``P`` sorted ascending by column 0. A point
can only lie within max-norm distance r of row i if its column-0 value lies
within r as well, so each query scans outward from i along the sorted order
and stops as soon as the column-0 gap alone rules out the rest.
"""

import numba as nb
import numpy as np


@nb.njit(cache=True, nogil=True, boundscheck=False)
def kth_distance_sorted(P, k):
    n, d = P.shape
    out = np.empty(n)
    best = np.empty(k)
    for i in range(n):
        for t in range(k):
            best[t] = np.inf
        key = P[i, 0]
        lo = i - 1
        hi = i + 1
        while True:
            dlo = key - P[lo, 0] if lo >= 0 else np.inf
            dhi = P[hi, 0] - key if hi < n else np.inf
            if dlo <= dhi:
                j = lo
                gap = dlo
                lo -= 1
            else:
                j = hi
                gap = dhi
                hi += 1
            b = best[k - 1]
            if gap >= b:
                break
            m = gap
            for c in range(1, d):
                v = abs(P[j, c] - P[i, c])
                if v > m:
                    m = v
                    if m >= b:
                        break
            if m < b:
                t = k - 1
                while t > 0 and best[t - 1] > m:
                    best[t] = best[t - 1]
                    t -= 1
                best[t] = m
        out[i] = best[k - 1]
    return out


@nb.njit(cache=True, nogil=True, boundscheck=False)
def _within(P, i, j, c0, c1, r):
    for c in range(c0, c1):
        if abs(P[j, c] - P[i, c]) >= r:
            return False
    return True


@nb.njit(cache=True, nogil=True, boundscheck=False)
def count_strict_sorted(P, radii):
    n, d = P.shape
    out = np.zeros(n, np.int64)
    for i in range(n):
        r = radii[i]
        key = P[i, 0]
        cnt = 0
        j = i - 1
        while j >= 0 and key - P[j, 0] < r:
            if _within(P, i, j, 1, d, r):
                cnt += 1
            j -= 1
        j = i + 1
        while j < n and P[j, 0] - key < r:
            if _within(P, i, j, 1, d, r):
                cnt += 1
            j += 1
        out[i] = cnt
    return out


@nb.njit(cache=True, nogil=True, boundscheck=False)
def conditional_counts_sorted(P, radii, dz, dx):
    """Fused strict counts in the (X,Z), (Y,Z) and Z subspaces.

    Columns of ``P`` are laid out as z (dz) | x (dx) | y (rest).
    """
    n, d = P.shape
    nxz = np.zeros(n, np.int64)
    nyz = np.zeros(n, np.int64)
    nz = np.zeros(n, np.int64)
    for i in range(n):
        r = radii[i]
        key = P[i, 0]
        a = 0
        b = 0
        c = 0
        for step in (-1, 1):
            j = i + step
            while 0 <= j < n and abs(P[j, 0] - key) < r:
                if _within(P, i, j, 1, dz, r):
                    c += 1
                    if _within(P, i, j, dz, dz + dx, r):
                        a += 1
                    if _within(P, i, j, dz + dx, d, r):
                        b += 1
                j += step
        nxz[i] = a
        nyz[i] = b
        nz[i] = c
    return nxz, nyz, nz
