"""Pure-Python/NumPy versions of the compiled kernels in ``_ckernels.pyx``.

Same signatures and results; used when the extension is not built.
"""

import numpy as np


def directed_hausdorff(A, B):
    """``max_a min_b |a - b|`` for point arrays of shape ``(n, d)``."""
    A = np.ascontiguousarray(A, dtype=float)
    B = np.ascontiguousarray(B, dtype=float)
    best = 0.0
    chunk = max(1, 2_000_000 // max(B.shape[0], 1))
    for i in range(0, A.shape[0], chunk):
        a = A[i:i + chunk]
        d2 = ((a[:, None, :] - B[None, :, :]) ** 2).sum(axis=-1)
        best = max(best, float(d2.min(axis=1).max()))
    return float(np.sqrt(best))


def tv_prox_1d(y, lam):
    """Exact minimiser of ``0.5 |x - y|^2 + lam * sum |x[i+1] - x[i]|``.

    Condat's direct algorithm: a single forward sweep that extends the
    current segment while the tube of admissible values stays feasible and
    emits it otherwise.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    x = np.empty(n)
    if n == 0:
        return x
    lam = float(lam)
    if lam <= 0:
        return y.copy()
    k = k0 = kplus = kminus = 0
    umin, umax = lam, -lam
    vmin, vmax = y[0] - lam, y[0] + lam
    while True:
        while k == n - 1:
            if umin < 0.0:
                while True:
                    x[k0] = vmin
                    k0 += 1
                    if k0 > kminus:
                        break
                k = kminus = k0
                vmin = y[k0]
                umin = lam
                umax = vmin + umin - vmax
            elif umax > 0.0:
                while True:
                    x[k0] = vmax
                    k0 += 1
                    if k0 > kplus:
                        break
                k = kplus = k0
                vmax = y[k0]
                umax = -lam
                umin = vmax + umax - vmin
            else:
                vmin += umin / (k - k0 + 1)
                x[k0:k + 1] = vmin
                return x
        umin += y[k + 1] - vmin
        if umin < -lam:
            while True:
                x[k0] = vmin
                k0 += 1
                if k0 > kminus:
                    break
            k = kplus = kminus = k0
            vmin = y[k0]
            vmax = vmin + 2 * lam
            umin, umax = lam, -lam
            continue
        umax += y[k + 1] - vmax
        if umax > lam:
            while True:
                x[k0] = vmax
                k0 += 1
                if k0 > kplus:
                    break
            k = kplus = kminus = k0
            vmax = y[k0]
            vmin = vmax - 2 * lam
            umin, umax = lam, -lam
            continue
        k += 1
        if umin >= lam:
            kminus = k
            vmin += (umin - lam) / (kminus - k0 + 1)
            umin = lam
        if umax <= -lam:
            kplus = k
            vmax += (umax + lam) / (kplus - k0 + 1)
            umax = -lam


def chain_dp(node_cost, jump_cost):
    """Minimise ``sum_i node_cost[i, l_i] + sum_i jump_cost[l_i, l_{i+1}]``.

    Returns ``(labels, total)``; ties go to the lowest label index.
    """
    C = np.asarray(node_cost, dtype=float)
    J = np.asarray(jump_cost, dtype=float)
    n, L = C.shape
    back = np.empty((n, L), dtype=np.intp)
    D = C[0].copy()
    back[0] = np.arange(L)
    for i in range(1, n):
        cand = D[:, None] + J
        arg = np.argmin(cand, axis=0)
        D = cand[arg, np.arange(L)] + C[i]
        back[i] = arg
    labels = np.empty(n, dtype=np.intp)
    labels[-1] = int(np.argmin(D))
    for i in range(n - 1, 0, -1):
        labels[i - 1] = back[i, labels[i]]
    return labels, float(D.min())


def tv_prox_1d_weighted(y, w):
    """Exact minimiser of ``0.5 |x - y|^2 + sum_k w[k] |x[k+1] - x[k]|``.

    Taut string through the tube ``R_k +- w_{k-1}`` around the cumulative sums
    ``R``, built with a funnel: slopes from the current origin are bounded by
    the upper and lower tube points seen so far, and when the bounds cross the
    string bends at the point that set the violated bound.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    w = np.asarray(w, dtype=float)
    if w.size != max(n - 1, 0):
        raise ValueError("need one weight per face")
    x = np.empty(n)
    if n == 0:
        return x
    R = np.concatenate([[0.0], np.cumsum(y)])
    lo = R.copy()
    hi = R.copy()
    lo[1:n] -= w
    hi[1:n] += w
    ox, oy = 0, 0.0
    while ox < n:
        smax, imax = np.inf, -1
        smin, imin = -np.inf, -1
        k = ox + 1
        while True:
            su = (hi[k] - oy) / (k - ox)
            sl = (lo[k] - oy) / (k - ox)
            if su < smin:
                x[ox:imin] = smin
                oy += smin * (imin - ox)
                ox = imin
                break
            if sl > smax:
                x[ox:imax] = smax
                oy += smax * (imax - ox)
                ox = imax
                break
            if su < smax:
                smax, imax = su, k
            if sl > smin:
                smin, imin = sl, k
            if k == n:
                x[ox:n] = su
                ox = n
                break
            k += 1
    return x
