"""Compiled loops for the pair sums.

Work is split into a fixed number of chunks, each reduced into its own
buffer and summed in chunk order afterwards, so results do not depend on the
number of threads.
"""

import numpy as np
from numba import config, njit, prange

# prefer OpenMP; the bundled TBB is too old and only produces a warning
config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]

NCHUNK = 16


def pow_mode(p):
    for mode, val in ((1, 2.0), (2, 2.5), (3, 3.0), (4, 4.0)):
        if p == val:
            return mode
    return 0


@njit(inline="always")
def _abs_pow(a, p, mode):
    b = abs(a)
    if mode == 1:
        return b * b
    if mode == 2:
        return b * b * np.sqrt(b)
    if mode == 3:
        return b * b * b
    if mode == 4:
        return (b * b) * (b * b)
    if b == 0.0:
        return 0.0
    return b ** p


@njit(inline="always")
def _phi(a, p, mode):
    # |a|^(p-2) a with phi(0) = 0
    b = abs(a)
    if mode == 1:
        return a
    if mode == 2:
        return a * np.sqrt(b)
    if mode == 3:
        return a * b
    if mode == 4:
        return a * b * b
    if b == 0.0:
        return 0.0
    return a * b ** (p - 2.0)


@njit(parallel=True, cache=True)
def pairs_1d(u, n, gd, gstart, xx, yy, w, p, mode, want_grad):
    """sum_groups sum_cells sum_points w |u(c, xx) - u(c + d, yy)|^p."""
    ng = gd.shape[0]
    en = np.zeros(NCHUNK)
    gr = np.zeros((NCHUNK, u.shape[0]))
    for k in prange(NCHUNK):
        acc = 0.0
        for g in range(k, ng, NCHUNK):
            d = gd[g]
            for c in range(n - d):
                q = c + d
                u0 = u[c]
                u1 = u[c + 1]
                v0 = u[q]
                v1 = u[q + 1]
                for m in range(gstart[g], gstart[g + 1]):
                    a = u0 + (u1 - u0) * xx[m] - v0 - (v1 - v0) * yy[m]
                    acc += w[m] * _abs_pow(a, p, mode)
                    if want_grad:
                        f = p * w[m] * _phi(a, p, mode)
                        gr[k, c] += f * (1.0 - xx[m])
                        gr[k, c + 1] += f * xx[m]
                        gr[k, q] -= f * (1.0 - yy[m])
                        gr[k, q + 1] -= f * yy[m]
        en[k] = acc
    total = 0.0
    grad = np.zeros(u.shape[0])
    for k in range(NCHUNK):
        total += en[k]
        if want_grad:
            grad += gr[k]
    return total, grad


@njit(parallel=True, cache=True)
def unary_1d(u, xi, wt, p, mode, want_grad):
    """sum_cells sum_points wt |u(c, xi)|^p."""
    n, nq = xi.shape
    en = np.zeros(n)
    gr = np.zeros((n, 2))
    for c in prange(n):
        acc = 0.0
        for m in range(nq):
            a = u[c] + (u[c + 1] - u[c]) * xi[c, m]
            acc += wt[c, m] * _abs_pow(a, p, mode)
            if want_grad:
                f = p * wt[c, m] * _phi(a, p, mode)
                gr[c, 0] += f * (1.0 - xi[c, m])
                gr[c, 1] += f * xi[c, m]
        en[c] = acc
    total = 0.0
    grad = np.zeros(u.shape[0])
    for c in range(n):
        total += en[c]
        if want_grad:
            grad[c] += gr[c, 0]
            grad[c + 1] += gr[c, 1]
    return total, grad


@njit(parallel=True, cache=True)
def pairs_2d(U, n1p, n2, gd1, gd2, gstart, ax, ay, tx, ty, w, p, mode, want_grad, which):
    """Pair sum on the axially padded cylinder.

    ``U`` has shape (n1p + 1, n2 + 1); padded cells 0 and n1p - 1 carry zeros.
    ``which`` selects all pairs (0), real-real pairs (1) or real-padded pairs (2).
    """
    ng = gd1.shape[0]
    en = np.zeros(NCHUNK)
    gr = np.zeros((NCHUNK, U.shape[0], U.shape[1]))
    for k in prange(NCHUNK):
        acc = 0.0
        for g in range(k, ng, NCHUNK):
            d1 = gd1[g]
            d2 = gd2[g]
            for i in range(n1p - d1):
                j = i + d1
                vi = i == 0 or i == n1p - 1
                vj = j == 0 or j == n1p - 1
                if vi and vj:
                    continue
                if which == 1 and (vi or vj):
                    continue
                if which == 2 and not (vi or vj):
                    continue
                for c in range(max(0, -d2), min(n2, n2 - d2)):
                    e = c + d2
                    a00 = U[i, c]
                    a10 = U[i + 1, c]
                    a01 = U[i, c + 1]
                    a11 = U[i + 1, c + 1]
                    b00 = U[j, e]
                    b10 = U[j + 1, e]
                    b01 = U[j, e + 1]
                    b11 = U[j + 1, e + 1]
                    for m in range(gstart[g], gstart[g + 1]):
                        s1 = ax[m]
                        s2 = tx[m]
                        r1 = ay[m]
                        r2 = ty[m]
                        ux = ((1.0 - s1) * ((1.0 - s2) * a00 + s2 * a01)
                              + s1 * ((1.0 - s2) * a10 + s2 * a11))
                        uy = ((1.0 - r1) * ((1.0 - r2) * b00 + r2 * b01)
                              + r1 * ((1.0 - r2) * b10 + r2 * b11))
                        a = ux - uy
                        acc += w[m] * _abs_pow(a, p, mode)
                        if want_grad:
                            f = p * w[m] * _phi(a, p, mode)
                            gr[k, i, c] += f * (1.0 - s1) * (1.0 - s2)
                            gr[k, i + 1, c] += f * s1 * (1.0 - s2)
                            gr[k, i, c + 1] += f * (1.0 - s1) * s2
                            gr[k, i + 1, c + 1] += f * s1 * s2
                            gr[k, j, e] -= f * (1.0 - r1) * (1.0 - r2)
                            gr[k, j + 1, e] -= f * r1 * (1.0 - r2)
                            gr[k, j, e + 1] -= f * (1.0 - r1) * r2
                            gr[k, j + 1, e + 1] -= f * r1 * r2
        en[k] = acc
    total = 0.0
    grad = np.zeros(U.shape)
    for k in range(NCHUNK):
        total += en[k]
        if want_grad:
            grad += gr[k]
    return total, grad


@njit(parallel=True, cache=True)
def unary_2d(U, ua, ut, uw, p, mode, want_grad):
    """sum over real cells (i, c) of uw[i, c, m] |u(i, c; ua[c, m], ut[c, m])|^p.

    ``U`` is the unpadded nodal array, ``uw`` has shape (n1, n2, K).
    """
    n1, n2, nk = uw.shape
    en = np.zeros(n1)
    gr = np.zeros((n1, 2, U.shape[1]))
    for i in prange(n1):
        acc = 0.0
        for c in range(n2):
            a00 = U[i, c]
            a10 = U[i + 1, c]
            a01 = U[i, c + 1]
            a11 = U[i + 1, c + 1]
            for m in range(nk):
                wm = uw[i, c, m]
                if wm == 0.0:
                    continue
                s1 = ua[c, m]
                s2 = ut[c, m]
                a = ((1.0 - s1) * ((1.0 - s2) * a00 + s2 * a01)
                     + s1 * ((1.0 - s2) * a10 + s2 * a11))
                acc += wm * _abs_pow(a, p, mode)
                if want_grad:
                    f = p * wm * _phi(a, p, mode)
                    gr[i, 0, c] += f * (1.0 - s1) * (1.0 - s2)
                    gr[i, 1, c] += f * s1 * (1.0 - s2)
                    gr[i, 0, c + 1] += f * (1.0 - s1) * s2
                    gr[i, 1, c + 1] += f * s1 * s2
        en[i] = acc
    total = 0.0
    grad = np.zeros(U.shape)
    for i in range(n1):
        total += en[i]
        if want_grad:
            grad[i] += gr[i, 0]
            grad[i + 1] += gr[i, 1]
    return total, grad
