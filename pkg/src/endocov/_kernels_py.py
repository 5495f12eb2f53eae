"""Pure NumPy implementations of the hot kernels.

These are the fallback used when the compiled extension is unavailable
(see ``endocov.kernels``). Semantics are identical to the Cython versions;
the parity tests assert exact agreement. The first-passage walks scan the
path in vectorised chunks, so the fallback stays usable on fine grids,
though the compiled core is much faster on the sequential recursions.
"""

from __future__ import annotations

import math

import numpy as np

_CHUNK = 8192


def heston_variance(v0, kappa, theta, xi, dt, dw, jump_idx=None, jump_size=None):
    """Euler variance recursion with full truncation.

    ``dw`` holds the Brownian increments of the variance driver (length n);
    the returned array has length n+1. Negative excursions of the state are
    floored at zero inside the drift and diffusion coefficients only.
    ``jump_idx``/``jump_size`` add jumps to the state: the jump lands on the
    increment into grid node ``jump_idx[k]`` (1-based node index).
    """
    n = dw.shape[0]
    v = np.empty(n + 1)
    cur = v0
    v[0] = cur
    if jump_idx is None or len(jump_idx) == 0:
        for i in range(n):
            vp = cur if cur > 0.0 else 0.0
            cur = cur + kappa * (theta - vp) * dt + xi * math.sqrt(vp) * dw[i]
            v[i + 1] = cur
    else:
        jp = 0
        nj = len(jump_idx)
        for i in range(n):
            vp = cur if cur > 0.0 else 0.0
            cur = cur + kappa * (theta - vp) * dt + xi * math.sqrt(vp) * dw[i]
            while jp < nj and jump_idx[jp] == i + 1:
                cur += jump_size[jp]
                jp += 1
            v[i + 1] = cur
    return v


def _scan_exit(s, start, lo, hi):
    """First index > start where s[idx]-s[start] leaves the open band (lo, hi).

    Touching a boundary counts as an exit. Returns -1 when the band is never
    left before the end of the path.
    """
    n = s.shape[0]
    base = s[start]
    pos = start + 1
    while pos < n:
        chunk = s[pos : pos + _CHUNK] - base
        mask = (chunk <= lo) | (chunk >= hi)
        hit = int(np.argmax(mask))
        if mask[hit]:
            return pos + hit
        pos += chunk.shape[0]
    return -1


def exit_walk_const(s, lo, hi):
    """All first-passage indices for a constant band, resetting at each exit."""
    out = []
    start = 0
    while True:
        idx = _scan_exit(s, start, lo, hi)
        if idx < 0:
            break
        out.append(idx)
        start = idx
    return np.asarray(out, dtype=np.int64)


def exit_walk_per_event(s, lo_arr, hi_arr):
    """First-passage walk with a per-event band.

    Event m uses the band (lo_arr[m], hi_arr[m]). Returns ``(indices,
    exhausted)`` where ``exhausted`` is True when more events occurred than
    the band arrays cover; the caller extends the arrays and reruns.
    """
    cap = lo_arr.shape[0]
    out = []
    start = 0
    m = 0
    while True:
        if m >= cap:
            return np.asarray(out, dtype=np.int64), True
        idx = _scan_exit(s, start, lo_arr[m], hi_arr[m])
        if idx < 0:
            break
        out.append(idx)
        start = idx
        m += 1
    return np.asarray(out, dtype=np.int64), False


def exit_walk_uncertainty(s, alpha, width_up, width_dn, ticks0, l_arr):
    """First-passage walk onto barrier levels anchored at the rounded price.

    Event m fires when the path touches or crosses one of the absolute
    levels ``ticks*alpha + width_up[m]`` or ``ticks*alpha - width_dn[m]``,
    where ``ticks`` is the integer tick count of the rounded observed price;
    an upper exit moves the rounded price up by l_arr[m] ticks and a lower
    exit down by the same amount. Anchoring at the rounded price rather than
    at the (overshot) path value keeps the scheme exact in distribution as
    the grid step vanishes. Returns ``(indices, directions, exhausted)``.
    """
    cap = width_up.shape[0]
    idx_out = []
    dir_out = []
    start = 0
    m = 0
    ticks = int(ticks0)
    while True:
        if m >= cap:
            return (
                np.asarray(idx_out, dtype=np.int64),
                np.asarray(dir_out, dtype=np.int8),
                True,
            )
        anchor = ticks * alpha
        lo = anchor - width_dn[m] - s[start]
        hi = anchor + width_up[m] - s[start]
        idx = _scan_exit(s, start, lo, hi)
        if idx < 0:
            break
        if s[idx] - s[start] >= hi:
            dir_out.append(1)
            ticks += int(l_arr[m])
        else:
            dir_out.append(-1)
            ticks -= int(l_arr[m])
        idx_out.append(idx)
        start = idx
        m += 1
    return (
        np.asarray(idx_out, dtype=np.int64),
        np.asarray(dir_out, dtype=np.int8),
        False,
    )


def exit_walk_grid(s, levels, k0):
    """First-passage walk onto the neighbours of the current grid level.

    ``levels`` is a strictly increasing array of absolute price levels and
    ``k0`` the index of the starting level. An event fires when the path
    touches or crosses an adjacent level; at the ends of the (finite) list
    the missing side is treated as unbounded. Returns ``(indices,
    level_indices)`` where level_indices[m] is the level reached by event m.
    """
    n = s.shape[0]
    nk = levels.shape[0]
    idx_out = []
    lvl_out = []
    k = int(k0)
    start = 0
    while True:
        lo_abs = levels[k - 1] if k > 0 else -np.inf
        hi_abs = levels[k + 1] if k < nk - 1 else np.inf
        base = s[start]
        idx = _scan_exit(s, start, lo_abs - base, hi_abs - base)
        if idx < 0:
            break
        x = s[idx]
        if x >= hi_abs:
            while k < nk - 1 and levels[k + 1] <= x:
                k += 1
        else:
            while k > 0 and levels[k - 1] >= x:
                k -= 1
        idx_out.append(idx)
        lvl_out.append(k)
        start = idx
    return np.asarray(idx_out, dtype=np.int64), np.asarray(lvl_out, dtype=np.int64)


def hy_pair_sum(t1, p1, t2, p2, tmax):
    """Two-pointer sweep over overlapping return intervals.

    Sums dp1[i]*dp2[j] over pairs whose half-open intervals
    [t1[i-1], t1[i]) and [t2[j-1], t2[j]) intersect, restricted to interval
    end times strictly below tmax.
    """
    n1 = t1.shape[0]
    n2 = t2.shape[0]
    acc = 0.0
    i = 1
    j = 1
    while i < n1 and j < n2:
        if t1[i] >= tmax or t2[j] >= tmax:
            break
        if t1[i - 1] < t2[j] and t2[j - 1] < t1[i]:
            acc += (p1[i] - p1[i - 1]) * (p2[j] - p2[j - 1])
        if t1[i] <= t2[j]:
            i += 1
        else:
            j += 1
    return acc


def one_correlated_merge(t1, t2):
    """Indices into t1 of the adjacent-correlated subsequence.

    Starting from t1[0], each step waits for the next time of the second
    series (>= the current time) and then takes the first time of the first
    series strictly after it.
    """
    n1 = t1.shape[0]
    n2 = t2.shape[0]
    out = [0]
    cur = t1[0]
    j = 0
    u = 0
    while True:
        while j < n2 and t2[j] < cur:
            j += 1
        if j >= n2:
            break
        s = t2[j]
        if u < 1:
            u = 1
        while u < n1 and t1[u] <= s:
            u += 1
        if u >= n1:
            break
        out.append(u)
        cur = t1[u]
    return np.asarray(out, dtype=np.int64)
