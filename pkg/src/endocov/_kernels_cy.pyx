# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the sequential hot loops.

Mirrors ``endocov._kernels_py`` exactly; the parity tests assert the two
backends agree bit-for-bit on identical inputs.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

DEF NOT_FOUND = -1


def heston_variance(double v0, double kappa, double theta, double xi,
                    double dt, double[::1] dw,
                    jump_idx=None, jump_size=None):
    cdef Py_ssize_t n = dw.shape[0]
    out = np.empty(n + 1)
    cdef double[::1] v = out
    cdef double cur = v0, vp
    cdef Py_ssize_t i, jp = 0, nj = 0
    cdef long long[::1] jidx
    cdef double[::1] jsz
    v[0] = cur
    if jump_idx is None or len(jump_idx) == 0:
        for i in range(n):
            vp = cur if cur > 0.0 else 0.0
            cur = cur + kappa * (theta - vp) * dt + xi * sqrt(vp) * dw[i]
            v[i + 1] = cur
    else:
        jidx = np.ascontiguousarray(jump_idx, dtype=np.int64)
        jsz = np.ascontiguousarray(jump_size, dtype=np.float64)
        nj = jidx.shape[0]
        for i in range(n):
            vp = cur if cur > 0.0 else 0.0
            cur = cur + kappa * (theta - vp) * dt + xi * sqrt(vp) * dw[i]
            while jp < nj and jidx[jp] == i + 1:
                cur += jsz[jp]
                jp += 1
            v[i + 1] = cur
    return out


cdef inline Py_ssize_t _scan_exit(double[::1] s, Py_ssize_t start,
                                  double lo, double hi) noexcept nogil:
    cdef Py_ssize_t n = s.shape[0]
    cdef double base = s[start]
    cdef double d
    cdef Py_ssize_t i
    for i in range(start + 1, n):
        d = s[i] - base
        if d <= lo or d >= hi:
            return i
    return NOT_FOUND


def exit_walk_const(double[::1] s, double lo, double hi):
    cdef list out = []
    cdef Py_ssize_t start = 0, idx
    while True:
        idx = _scan_exit(s, start, lo, hi)
        if idx < 0:
            break
        out.append(idx)
        start = idx
    return np.asarray(out, dtype=np.int64)


def exit_walk_per_event(double[::1] s, double[::1] lo_arr, double[::1] hi_arr):
    cdef Py_ssize_t cap = lo_arr.shape[0]
    cdef list out = []
    cdef Py_ssize_t start = 0, m = 0, idx
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


def exit_walk_uncertainty(double[::1] s, double alpha,
                          double[::1] width_up, double[::1] width_dn,
                          long long ticks0, long long[::1] l_arr):
    cdef Py_ssize_t cap = width_up.shape[0]
    cdef list idx_out = []
    cdef list dir_out = []
    cdef Py_ssize_t start = 0, m = 0, idx
    cdef long long ticks = ticks0
    cdef double anchor, lo, hi
    while True:
        if m >= cap:
            return (np.asarray(idx_out, dtype=np.int64),
                    np.asarray(dir_out, dtype=np.int8), True)
        anchor = ticks * alpha
        lo = anchor - width_dn[m] - s[start]
        hi = anchor + width_up[m] - s[start]
        idx = _scan_exit(s, start, lo, hi)
        if idx < 0:
            break
        if s[idx] - s[start] >= hi:
            dir_out.append(1)
            ticks += l_arr[m]
        else:
            dir_out.append(-1)
            ticks -= l_arr[m]
        idx_out.append(idx)
        start = idx
        m += 1
    return (np.asarray(idx_out, dtype=np.int64),
            np.asarray(dir_out, dtype=np.int8), False)


def exit_walk_grid(double[::1] s, double[::1] levels, Py_ssize_t k0):
    cdef Py_ssize_t n = s.shape[0]
    cdef Py_ssize_t nk = levels.shape[0]
    cdef list idx_out = []
    cdef list lvl_out = []
    cdef Py_ssize_t k = k0, start = 0, i
    cdef double lo_abs, hi_abs, base, x
    cdef bint have_lo, have_hi, hit
    while True:
        have_lo = k > 0
        have_hi = k < nk - 1
        lo_abs = levels[k - 1] if have_lo else 0.0
        hi_abs = levels[k + 1] if have_hi else 0.0
        base = s[start]
        hit = False
        for i in range(start + 1, n):
            x = s[i]
            if (have_lo and x <= lo_abs) or (have_hi and x >= hi_abs):
                hit = True
                break
        if not hit:
            break
        if have_hi and x >= hi_abs:
            while k < nk - 1 and levels[k + 1] <= x:
                k += 1
        else:
            while k > 0 and levels[k - 1] >= x:
                k -= 1
        idx_out.append(i)
        lvl_out.append(k)
        start = i
    return (np.asarray(idx_out, dtype=np.int64),
            np.asarray(lvl_out, dtype=np.int64))


def hy_pair_sum(double[::1] t1, double[::1] p1,
                double[::1] t2, double[::1] p2, double tmax):
    cdef Py_ssize_t n1 = t1.shape[0]
    cdef Py_ssize_t n2 = t2.shape[0]
    cdef double acc = 0.0
    cdef Py_ssize_t i = 1, j = 1
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


def one_correlated_merge(double[::1] t1, double[::1] t2):
    cdef Py_ssize_t n1 = t1.shape[0]
    cdef Py_ssize_t n2 = t2.shape[0]
    cdef list out = [0]
    cdef double cur = t1[0], s
    cdef Py_ssize_t j = 0, u = 0
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
