"""Compiled inner loops.

Every kernel works on a caller-chosen index range and writes only inside it,
so the same kernel serves serial and tiled/threaded execution. Per-point
arithmetic never depends on the range, which is what makes results
bitwise independent of the tile and worker counts. No fastmath: the
accumulation order must stay exactly as written.
"""

import numpy as np
from numba import njit


@njit(nogil=True, cache=True)
def weight_rows(src, dst, w, wh, ww, left, rowidx, colidx, j0, j1, i0, i1, acc):
    # rowidx[j + q] is the source row of window row q for output row j;
    # colidx[i + p] likewise for columns. acc is a scratch row of length >= i1 - i0.
    n = i1 - i0
    nx = src.shape[1]
    for j in range(j0, j1):
        for k in range(n):
            acc[k] = 0.0
        for q in range(wh):
            r = rowidx[j + q]
            for p in range(ww):
                wt = w[q * ww + p]
                # point k reads column shift + k; only the two ends can wrap
                shift = i0 + p - left
                klo = min(n, max(0, -shift))
                khi = max(klo, min(n, nx - shift))
                for k in range(klo):
                    acc[k] += wt * src[r, colidx[i0 + p + k]]
                # slices keep indices provably non-negative so the loop vectorises
                row = src[r, shift + klo : shift + khi]
                part = acc[klo:khi]
                for k in range(khi - klo):
                    part[k] += wt * row[k]
                for k in range(khi, n):
                    acc[k] += wt * src[r, colidx[i0 + p + k]]
        for k in range(n):
            dst[j, i0 + k] = acc[k]


@njit(nogil=True)
def function_rows(src, dst, fn, coe, wh, ww, rowidx, colidx, j0, j1, i0, i1, win):
    for j in range(j0, j1):
        for i in range(i0, i1):
            for q in range(wh):
                r = rowidx[j + q]
                for p in range(ww):
                    win[q * ww + p] = src[r, colidx[i + p]]
            dst[j, i] = fn(win, coe, ww)


@njit(nogil=True, cache=True)
def transpose_rows(src, dst, j0, j1):
    # dst[i, j] = src[j, i] for source rows j in [j0, j1)
    nx = src.shape[1]
    for j in range(j0, j1):
        for i in range(nx):
            dst[i, j] = src[j, i]


@njit(nogil=True, cache=True)
def extrapolate_rows(c, cp, cbar, shifted, kappa, j0, j1):
    # shifted = cbar - kappa feeds the biharmonic, so constants give exact zeros
    nx = c.shape[1]
    for j in range(j0, j1):
        for i in range(nx):
            v = 2.0 * c[j, i] - cp[j, i]
            cbar[j, i] = v
            shifted[j, i] = v - kappa


@njit(nogil=True, cache=True)
def assemble_rows(c, cp, bih, nl, rhs, a_diff, a_bih, a_nl, j0, j1):
    nx = c.shape[1]
    for j in range(j0, j1):
        for i in range(nx):
            rhs[j, i] = a_diff * (c[j, i] - cp[j, i]) + a_bih * bih[j, i] + a_nl * nl[j, i]


@njit(nogil=True, cache=True)
def advance_rows(c, cp, cbar, v, j0, j1):
    nx = c.shape[1]
    for j in range(j0, j1):
        for i in range(nx):
            cp[j, i] = c[j, i]
            c[j, i] = cbar[j, i] + v[j, i]


# Pentadiagonal systems, interleaved layout: arrays are (n, batch) and column b
# is system b. Diagonals: ll (r, r-2), l (r, r-1), d (r, r), u (r, r+1), uu (r, r+2).


@njit(nogil=True, cache=True)
def penta_factor(ll, l, d, u, uu, e, gam, mu, al, be, b0, b1):
    """LU factorisation without pivoting for systems b0..b1.

    Out-of-band entries (ll/l near the top, u/uu near the bottom) are ignored.
    Returns (system, row) of the first zero pivot, or (-1, -1).
    """
    n = d.shape[0]
    for r in range(n):
        for b in range(b0, b1):
            if r >= 2:
                e_r = ll[r, b]
                g = l[r, b] - al[r - 2, b] * e_r
                m = d[r, b] - be[r - 2, b] * e_r - al[r - 1, b] * g
            elif r == 1:
                e_r = 0.0
                g = l[r, b]
                m = d[r, b] - al[r - 1, b] * g
            else:
                e_r = 0.0
                g = 0.0
                m = d[r, b]
            e[r, b] = e_r
            gam[r, b] = g
            mu[r, b] = m
            if m == 0.0:
                al[r, b] = 0.0
                be[r, b] = 0.0
                continue
            if r <= n - 2:
                if r >= 1:
                    al[r, b] = (u[r, b] - be[r - 1, b] * g) / m
                else:
                    al[r, b] = u[r, b] / m
            else:
                al[r, b] = 0.0
            if r <= n - 3:
                be[r, b] = uu[r, b] / m
            else:
                be[r, b] = 0.0
        for b in range(b0, b1):
            if mu[r, b] == 0.0:
                return b, r
    return -1, -1


@njit(nogil=True, cache=True)
def penta_solve(e, gam, mu, al, be, x, b0, b1):
    """Overwrite columns b0..b1 of x (n, batch) with the solution."""
    n = mu.shape[0]
    for b in range(b0, b1):
        x[0, b] = x[0, b] / mu[0, b]
    for b in range(b0, b1):
        x[1, b] = (x[1, b] - gam[1, b] * x[0, b]) / mu[1, b]
    for r in range(2, n):
        for b in range(b0, b1):
            x[r, b] = (x[r, b] - e[r, b] * x[r - 2, b] - gam[r, b] * x[r - 1, b]) / mu[r, b]
    for b in range(b0, b1):
        x[n - 2, b] = x[n - 2, b] - al[n - 2, b] * x[n - 1, b]
    for r in range(n - 3, -1, -1):
        for b in range(b0, b1):
            x[r, b] = x[r, b] - al[r, b] * x[r + 1, b] - be[r, b] * x[r + 2, b]


@njit(nogil=True, cache=True)
def woodbury_correct(x, w, kinv, y, b0, b1):
    """x <- x - W K^{-1} V^T x for the corner columns (0, 1, n-2, n-1).

    w is (4, n, batch), kinv is (4, 4, batch), y is a (4, batch) scratch.
    """
    n = x.shape[0]
    for b in range(b0, b1):
        t0 = x[0, b]
        t1 = x[1, b]
        t2 = x[n - 2, b]
        t3 = x[n - 1, b]
        for m in range(4):
            y[m, b] = kinv[m, 0, b] * t0 + kinv[m, 1, b] * t1 + kinv[m, 2, b] * t2 + kinv[m, 3, b] * t3
    for r in range(n):
        for b in range(b0, b1):
            x[r, b] = x[r, b] - (
                w[0, r, b] * y[0, b] + w[1, r, b] * y[1, b] + w[2, r, b] * y[2, b] + w[3, r, b] * y[3, b]
            )
