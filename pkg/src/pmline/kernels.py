"""Numeric inner loops.

Every kernel exists twice: a loop version compiled by numba and a
vectorised numpy version.  The public names bind to one or the other at
import time according to :data:`pmline._jit.USE_NUMBA`; both stay
importable under their private names for cross-checking and benchmarks.
"""
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ._jit import USE_NUMBA, njit

__all__ = [
    "rank_sum_scan",
    "rolling_mean",
    "levenshtein",
    "wasserstein_1d",
    "BACKEND",
]


# ---------------------------------------------------------------- rank sum


@njit
def _rank_sum_scan_loop(x, w):
    n = x.shape[0]
    m = n - 2 * w + 1
    out = np.empty(max(m, 0), dtype=np.float64)
    mean = w * w / 2.0
    sd = np.sqrt(w * w * (2.0 * w + 1.0) / 12.0)
    for k in range(m):
        t = k + w
        u = 0.0
        for i in range(t - w, t):
            xi = x[i]
            for j in range(t, t + w):
                u += (x[j] > xi) + 0.5 * (x[j] == xi)
        out[k] = (u - mean) / sd
    return out


def _rank_sum_scan_numpy(x, w, chunk=256):
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    m = n - 2 * w + 1
    if m <= 0:
        return np.empty(0, dtype=np.float64)
    wins = sliding_window_view(x, w)
    pre = wins[:m]
    post = wins[w:w + m]
    u = np.empty(m, dtype=np.float64)
    for lo in range(0, m, chunk):
        a = pre[lo:lo + chunk, :, None]
        b = post[lo:lo + chunk, None, :]
        u[lo:lo + chunk] = (b > a).sum(axis=(1, 2)) + 0.5 * (b == a).sum(axis=(1, 2))
    mean = w * w / 2.0
    sd = np.sqrt(w * w * (2.0 * w + 1.0) / 12.0)
    return (u - mean) / sd


# ------------------------------------------------------------ rolling mean


@njit
def _rolling_mean_loop(x, w):
    n = x.shape[0]
    m = n - w + 1
    out = np.empty(max(m, 0), dtype=np.float64)
    if m <= 0:
        return out
    # direct window sums: no running-sum drift on long series
    for k in range(m):
        s = 0.0
        for i in range(k, k + w):
            s += x[i]
        out[k] = s / w
    return out


def _rolling_mean_numpy(x, w):
    x = np.asarray(x, dtype=np.float64)
    if x.shape[0] < w:
        return np.empty(0, dtype=np.float64)
    return sliding_window_view(x, w).mean(axis=1)


# ------------------------------------------------------------- levenshtein


@njit
def _levenshtein_loop(a, b):
    n = a.shape[0]
    m = b.shape[0]
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=prev.dtype)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            v = prev[j - 1] + cost
            if prev[j] + 1 < v:
                v = prev[j] + 1
            if cur[j - 1] + 1 < v:
                v = cur[j - 1] + 1
            cur[j] = v
        prev, cur = cur, prev
    return prev[m]


def _levenshtein_numpy(a, b):
    a = np.asarray(a)
    b = np.asarray(b)
    m = b.shape[0]
    idx = np.arange(m + 1)
    row = idx.copy()
    for i in range(1, a.shape[0] + 1):
        sub = row[:-1] + (b != a[i - 1])
        tmp = np.empty(m + 1, dtype=row.dtype)
        tmp[0] = i
        tmp[1:] = np.minimum(row[1:] + 1, sub)
        # insertion chain: row[j] = min_k<=j tmp[k] + (j - k)
        row = np.minimum.accumulate(tmp - idx) + idx
    return int(row[m])


# ----------------------------------------------------------- wasserstein


@njit
def _wasserstein_loop(a, b):
    n = a.shape[0]
    m = b.shape[0]
    i = 0
    j = 0
    pos = 0
    acc = 0.0
    while i < n and j < m:
        na = (i + 1) * m
        nb = (j + 1) * n
        nxt = na if na < nb else nb
        acc += abs(a[i] - b[j]) * (nxt - pos)
        pos = nxt
        if na == nxt:
            i += 1
        if nb == nxt:
            j += 1
    return acc / (n * m)


def _wasserstein_numpy(a, b):
    n = a.shape[0]
    m = b.shape[0]
    ends = np.union1d(np.arange(1, n + 1, dtype=np.int64) * m,
                      np.arange(1, m + 1, dtype=np.int64) * n)
    starts = np.concatenate(([0], ends[:-1]))
    ia = (ends - 1) // m
    ib = (ends - 1) // n
    return float(np.sum(np.abs(a[ia] - b[ib]) * (ends - starts)) / (n * m))


# ------------------------------------------------------------- dispatch


def rank_sum_scan(x, w):
    """Standardised Mann-Whitney statistic of ``x[t:t+w]`` against ``x[t-w:t]``.

    Returns one value per split point ``t = w .. len(x) - w``; positive
    values mean the later window ranks higher.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return _rank_sum_scan_loop(x, int(w))
    return _rank_sum_scan_numpy(x, int(w))


def rolling_mean(x, w):
    x = np.ascontiguousarray(x, dtype=np.float64)
    if USE_NUMBA:
        return _rolling_mean_loop(x, int(w))
    return _rolling_mean_numpy(x, int(w))


def levenshtein(a, b):
    """Edit distance between two integer-coded sequences."""
    a = np.ascontiguousarray(a, dtype=np.int64)
    b = np.ascontiguousarray(b, dtype=np.int64)
    if USE_NUMBA:
        return int(_levenshtein_loop(a, b))
    return _levenshtein_numpy(a, b)


def wasserstein_1d(a, b):
    """Exact W1 between two equal-weight empirical samples (sorted internally)."""
    a = np.sort(np.asarray(a, dtype=np.float64))
    b = np.sort(np.asarray(b, dtype=np.float64))
    if USE_NUMBA:
        return float(_wasserstein_loop(a, b))
    return _wasserstein_numpy(a, b)


BACKEND = "numba" if USE_NUMBA else "numpy"
