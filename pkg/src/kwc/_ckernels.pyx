# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops; see ``_pykernels`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def directed_hausdorff(A, B):
    """``max_a min_b |a - b|`` with early exit once ``a`` is closer than the running max."""
    cdef double[:, ::1] a = np.ascontiguousarray(A, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double cmax = 0.0, cmin, dist, diff
    for i in range(n):
        cmin = INFINITY
        for j in range(m):
            dist = 0.0
            for k in range(d):
                diff = a[i, k] - b[j, k]
                dist += diff * diff
            if dist < cmin:
                cmin = dist
                if cmin < cmax:
                    break
        if cmin > cmax:
            cmax = cmin
    return sqrt(cmax)


def tv_prox_1d(y_in, double lam):
    """Exact 1D TV proximal map (Condat's direct algorithm)."""
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
    if n == 0:
        return out
    if lam <= 0:
        return np.array(y_in, dtype=np.float64, copy=True)
    cdef Py_ssize_t k = 0, k0 = 0, kplus = 0, kminus = 0
    cdef double umin = lam, umax = -lam
    cdef double vmin = y[0] - lam, vmax = y[0] + lam
    cdef double twolam = 2.0 * lam, minlam = -lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = k0
                kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = k0
                kplus = k0
                vmax = y[k0]
                umax = minlam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                while k0 <= k:
                    x[k0] = vmin
                    k0 += 1
                return out
        umin += y[k + 1] - vmin
        if umin < minlam:
            while True:
                x[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = k0
            kplus = k0
            kminus = k0
            vmin = y[k0]
            vmax = vmin + twolam
            umin = lam
            umax = minlam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            while True:
                x[k0] = vmax
                k0 += 1
                if k0 > kplus:
                    break
            k = k0
            kplus = k0
            kminus = k0
            vmax = y[k0]
            vmin = vmax - twolam
            umin = lam
            umax = minlam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= minlam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = minlam


def chain_dp(node_cost, jump_cost):
    """Viterbi recursion over a chain of ``n`` nodes with ``L`` labels each."""
    cdef double[:, ::1] C = np.ascontiguousarray(node_cost, dtype=np.float64)
    cdef double[:, ::1] J = np.ascontiguousarray(jump_cost, dtype=np.float64)
    cdef Py_ssize_t n = C.shape[0], L = C.shape[1]
    cdef Py_ssize_t i, l, k, arg
    back_arr = np.empty((n, L), dtype=np.intp)
    cdef Py_ssize_t[:, ::1] back = back_arr
    prev_arr = np.empty(L, dtype=np.float64)
    cur_arr = np.empty(L, dtype=np.float64)
    cdef double[::1] prev = prev_arr
    cdef double[::1] cur = cur_arr
    cdef double best, cand
    for l in range(L):
        prev[l] = C[0, l]
        back[0, l] = l
    for i in range(1, n):
        for l in range(L):
            best = INFINITY
            arg = 0
            for k in range(L):
                cand = prev[k] + J[k, l]
                if cand < best:
                    best = cand
                    arg = k
            cur[l] = best + C[i, l]
            back[i, l] = arg
        for l in range(L):
            prev[l] = cur[l]
    labels = np.empty(n, dtype=np.intp)
    best = INFINITY
    arg = 0
    for l in range(L):
        if prev[l] < best:
            best = prev[l]
            arg = l
    labels[n - 1] = arg
    for i in range(n - 1, 0, -1):
        labels[i - 1] = back[i, labels[i]]
    return labels, float(best)


def tv_prox_1d_weighted(y_in, w_in):
    """Weighted 1D TV proximal map by a funnel taut-string construction."""
    cdef double[::1] y = np.ascontiguousarray(y_in, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(w_in, dtype=np.float64)
    cdef Py_ssize_t n = y.shape[0]
    if w.shape[0] != (n - 1 if n > 0 else 0):
        raise ValueError("need one weight per face")
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] x = out
    if n == 0:
        return out
    R_arr = np.zeros(n + 1, dtype=np.float64)
    cdef double[::1] R = R_arr
    cdef Py_ssize_t i, k, ox = 0, imax, imin
    for i in range(n):
        R[i + 1] = R[i] + y[i]
    lo_arr = R_arr.copy()
    hi_arr = R_arr.copy()
    cdef double[::1] lo = lo_arr
    cdef double[::1] hi = hi_arr
    for i in range(1, n):
        lo[i] -= w[i - 1]
        hi[i] += w[i - 1]
    cdef double oy = 0.0, smax, smin, su, sl
    while ox < n:
        smax = INFINITY
        smin = -INFINITY
        imax = -1
        imin = -1
        k = ox + 1
        while True:
            su = (hi[k] - oy) / (k - ox)
            sl = (lo[k] - oy) / (k - ox)
            if su < smin:
                for i in range(ox, imin):
                    x[i] = smin
                oy += smin * (imin - ox)
                ox = imin
                break
            if sl > smax:
                for i in range(ox, imax):
                    x[i] = smax
                oy += smax * (imax - ox)
                ox = imax
                break
            if su < smax:
                smax = su
                imax = k
            if sl > smin:
                smin = sl
                imin = k
            if k == n:
                for i in range(ox, n):
                    x[i] = su
                ox = n
                break
            k += 1
    return out
