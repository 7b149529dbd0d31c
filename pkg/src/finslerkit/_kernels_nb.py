"""Numba @njit twins of the hot kernels, for the builtin metric kinds.

Same algorithms as ``_kernels_np`` (damped Newton Legendre inverse,
sphere-chart Newton dual norm) but with per-row loops and early exit, plus
fused link-energy stencils for the condenser descent. Custom-callback
metrics cannot enter here; they always run the numpy path.
"""

from __future__ import annotations

import numpy as np
from numba import njit, prange

EUCLIDEAN = 0
RANDERS = 1

_TINY = 1e-300


@njit(cache=True, inline="always")
def _norm_row(kind, b, y):
    s = 0.0
    for i in range(y.shape[0]):
        s += y[i] * y[i]
    f = np.sqrt(s)
    if kind == RANDERS:
        for i in range(y.shape[0]):
            f += b[i] * y[i]
    return f


@njit(cache=True)
def _grad_row(kind, b, y, out):
    # fiber derivative of F^2/2
    n = y.shape[0]
    s = 0.0
    for i in range(n):
        s += y[i] * y[i]
    ny = np.sqrt(s)
    if ny == 0.0:
        for i in range(n):
            out[i] = 0.0
        return
    if kind == EUCLIDEAN:
        for i in range(n):
            out[i] = y[i]
        return
    f = ny
    for i in range(n):
        f += b[i] * y[i]
    for i in range(n):
        out[i] = f * (y[i] / ny + b[i])


@njit(cache=True)
def _hess_row(kind, b, y, out):
    n = y.shape[0]
    if kind == EUCLIDEAN:
        for i in range(n):
            for j in range(n):
                out[i, j] = 1.0 if i == j else 0.0
        return
    s = 0.0
    for i in range(n):
        s += y[i] * y[i]
    ny = np.sqrt(s)
    f = ny
    for i in range(n):
        f += b[i] * y[i]
    for i in range(n):
        for j in range(n):
            yi = y[i] / ny
            yj = y[j] / ny
            li = yi + b[i]
            lj = yj + b[j]
            proj = (1.0 if i == j else 0.0) - yi * yj
            out[i, j] = li * lj + (f / ny) * proj


@njit(cache=True, parallel=True)
def norm_batch(kind, b, Y):
    N = Y.shape[0]
    out = np.empty(N)
    for r in prange(N):
        out[r] = _norm_row(kind, b, Y[r])
    return out


@njit(cache=True, parallel=True)
def legendre_batch(kind, b, Y):
    N, n = Y.shape
    out = np.empty((N, n))
    for r in prange(N):
        _grad_row(kind, b, Y[r], out[r])
    return out


@njit(cache=True, parallel=True)
def hessian_batch(kind, b, Y):
    N, n = Y.shape
    out = np.empty((N, n, n))
    for r in prange(N):
        _hess_row(kind, b, Y[r], out[r])
    return out


@njit(cache=True)
def _merit_row(kind, b, y, a):
    f = _norm_row(kind, b, y)
    m = 0.5 * f * f
    for i in range(y.shape[0]):
        m -= a[i] * y[i]
    return m


@njit(cache=True)
def _solve_small(M, rhs, out):
    """Gaussian elimination with partial pivoting; M and rhs are clobbered."""
    n = rhs.shape[0]
    for col in range(n):
        piv = col
        best = abs(M[col, col])
        for r in range(col + 1, n):
            v = abs(M[r, col])
            if v > best:
                best = v
                piv = r
        if piv != col:
            for c in range(n):
                tmp = M[col, c]
                M[col, c] = M[piv, c]
                M[piv, c] = tmp
            tmp = rhs[col]
            rhs[col] = rhs[piv]
            rhs[piv] = tmp
        d = M[col, col]
        for r in range(col + 1, n):
            f = M[r, col] / d
            if f != 0.0:
                for c in range(col, n):
                    M[r, c] -= f * M[col, c]
                rhs[r] -= f * rhs[col]
    for r in range(n - 1, -1, -1):
        s = rhs[r]
        for c in range(r + 1, n):
            s -= M[r, c] * out[c]
        out[r] = s / M[r, r]


@njit(cache=True, parallel=True)
def legendre_inverse_batch(kind, b, A, tol, max_iter, max_halvings):
    """Rowwise damped Newton for J(y) = alpha. Returns (Y, residuals)."""
    N, n = A.shape
    Y = np.empty((N, n))
    res = np.zeros(N)
    for r in prange(N):
        a = A[r]
        anorm = 0.0
        for i in range(n):
            anorm = max(anorm, abs(a[i]))
        if anorm == 0.0:
            for i in range(n):
                Y[r, i] = 0.0
            continue
        scale = max(anorm, 1.0)
        y = a.copy()
        R = np.empty(n)
        g = np.empty(n)
        H = np.empty((n, n))
        rhs = np.empty(n)
        dy = np.empty(n)
        worst = 0.0
        for _ in range(max_iter):
            _grad_row(kind, b, y, g)
            worst = 0.0
            for i in range(n):
                R[i] = g[i] - a[i]
                worst = max(worst, abs(R[i]))
            if worst <= tol * scale:
                break
            _hess_row(kind, b, y, H)
            for i in range(n):
                rhs[i] = -R[i]
            _solve_small(H, rhs, dy)
            m0 = _merit_row(kind, b, y, a)
            gdot = 0.0
            for i in range(n):
                gdot += R[i] * dy[i]
            slack = 1e-14 * (1.0 + abs(m0))
            t = 1.0
            yt = y + dy
            mt = _merit_row(kind, b, yt, a)
            for _h in range(max_halvings):
                if mt <= m0 + 1e-4 * t * gdot + slack:
                    break
                t *= 0.5
                for i in range(n):
                    yt[i] = y[i] + t * dy[i]
                mt = _merit_row(kind, b, yt, a)
            for i in range(n):
                y[i] = yt[i]
        Y[r] = y
        res[r] = worst / scale
    return Y, res


@njit(cache=True)
def _chart_dir(d, U, u, out):
    # out = normalize(d + U @ u)
    n = d.shape[0]
    m = u.shape[0]
    s = 0.0
    for i in range(n):
        v = d[i]
        for j in range(m):
            v += U[i, j] * u[j]
        out[i] = v
        s += v * v
    s = np.sqrt(s)
    for i in range(n):
        out[i] /= s


@njit(cache=True)
def _dual_obj_row(kind, b, ahat, d):
    num = 0.0
    for i in range(d.shape[0]):
        num += ahat[i] * d[i]
    return num / _norm_row(kind, b, d)


@njit(cache=True)
def _dual_norm_row(kind, b, a, tol, max_iter):
    n = a.shape[0]
    anorm = 0.0
    for i in range(n):
        anorm += a[i] * a[i]
    anorm = np.sqrt(anorm)
    if anorm == 0.0:
        return 0.0
    ahat = a / anorm
    d = ahat.copy()
    m = n - 1
    U = np.empty((n, m))
    g = np.empty(n)
    val = _dual_obj_row(kind, b, ahat, d)
    e = 1e-3
    grad = np.empty(m)
    hess = np.empty((m, m))
    negh = np.empty((m, m))
    rhs = np.empty(m)
    du = np.empty(m)
    u = np.empty(m)
    stall = 0
    for _ in range(max_iter):
        # Householder tangent basis at d
        v = d.copy()
        s = 1.0 if d[0] >= 0.0 else -1.0
        v[0] += s
        vv = 0.0
        for i in range(n):
            vv += v[i] * v[i]
        for i in range(n):
            for j in range(m):
                U[i, j] = (1.0 if i == j + 1 else 0.0) - 2.0 * v[i] * v[j + 1] / vv

        f0 = val
        fp = np.empty(m)
        fm = np.empty(m)
        for i in range(m):
            for k in range(m):
                u[k] = 0.0
            u[i] = e
            _chart_dir(d, U, u, g)
            fp[i] = _dual_obj_row(kind, b, ahat, g)
            u[i] = -e
            _chart_dir(d, U, u, g)
            fm[i] = _dual_obj_row(kind, b, ahat, g)
            grad[i] = (fp[i] - fm[i]) / (2 * e)
            hess[i, i] = (fp[i] + fm[i] - 2 * f0) / (e * e)
        for i in range(m):
            for j in range(i + 1, m):
                for k in range(m):
                    u[k] = 0.0
                u[i] = e
                u[j] = e
                _chart_dir(d, U, u, g)
                fpp = _dual_obj_row(kind, b, ahat, g)
                u[j] = -e
                _chart_dir(d, U, u, g)
                fpm = _dual_obj_row(kind, b, ahat, g)
                u[i] = -e
                u[j] = e
                _chart_dir(d, U, u, g)
                fmp = _dual_obj_row(kind, b, ahat, g)
                u[j] = -e
                _chart_dir(d, U, u, g)
                fmm = _dual_obj_row(kind, b, ahat, g)
                hij = (fpp - fpm - fmp + fmm) / (4 * e * e)
                hess[i, j] = hij
                hess[j, i] = hij

        for i in range(m):
            rhs[i] = grad[i]
            for j in range(m):
                negh[i, j] = -hess[i, j]
        _solve_small(negh, rhs, du)
        asc = 0.0
        gn = 0.0
        dn = 0.0
        for i in range(m):
            asc += du[i] * grad[i]
            gn += grad[i] * grad[i]
            dn += du[i] * du[i]
        gn = np.sqrt(gn)
        dn = np.sqrt(dn)
        if asc <= 0.0 and gn > 0.0:
            for i in range(m):
                du[i] = grad[i] / gn * 0.1
            dn = 0.1
        if dn > 0.5:
            for i in range(m):
                du[i] *= 0.5 / dn

        t = 1.0
        ft = -1e308
        dnew = np.empty(n)
        for _h in range(30):
            for i in range(m):
                u[i] = t * du[i]
            _chart_dir(d, U, u, dnew)
            ft = _dual_obj_row(kind, b, ahat, dnew)
            if ft >= f0:
                break
            t *= 0.5
        if ft >= f0:
            for i in range(n):
                d[i] = dnew[i]
            newval = ft
        else:
            newval = f0
        if abs(newval - val) <= tol * max(1.0, abs(newval)):
            stall += 1
        else:
            stall = 0
        val = newval
        if stall >= 2:
            break
    return anorm * val


@njit(cache=True, parallel=True)
def dual_norm_batch(kind, b, A, tol, max_iter):
    N = A.shape[0]
    out = np.empty(N)
    for r in prange(N):
        if kind == EUCLIDEAN:
            s = 0.0
            for i in range(A.shape[1]):
                s += A[r, i] * A[r, i]
            out[r] = np.sqrt(s)
        else:
            out[r] = _dual_norm_row(kind, b, A[r], tol, max_iter)
    return out


@njit(cache=True, parallel=True)
def link_energy_grad_3d(u, h):
    """Euclidean link Dirichlet energy sum (du)^2 * h and its u-gradient."""
    nx, ny, nz = u.shape
    g = np.zeros_like(u)
    E = 0.0
    for i in prange(nx):
        acc = 0.0
        for j in range(ny):
            for k in range(nz):
                c = u[i, j, k]
                if i + 1 < nx:
                    d = u[i + 1, j, k] - c
                    acc += d * d
                    g[i, j, k] -= 2.0 * h * d
                if i > 0:
                    g[i, j, k] += 2.0 * h * (c - u[i - 1, j, k])
                if j + 1 < ny:
                    d = u[i, j + 1, k] - c
                    acc += d * d
                    g[i, j, k] -= 2.0 * h * d
                if j > 0:
                    g[i, j, k] += 2.0 * h * (c - u[i, j - 1, k])
                if k + 1 < nz:
                    d = u[i, j, k + 1] - c
                    acc += d * d
                    g[i, j, k] -= 2.0 * h * d
                if k > 0:
                    g[i, j, k] += 2.0 * h * (c - u[i, j, k - 1])
        E += acc
    return E * h, g


@njit(cache=True, parallel=True)
def link_energy_grad_2d(u, h):
    nx, ny = u.shape
    g = np.zeros_like(u)
    E = 0.0
    for i in prange(nx):
        acc = 0.0
        for j in range(ny):
            c = u[i, j]
            if i + 1 < nx:
                d = u[i + 1, j] - c
                acc += d * d
                g[i, j] -= 2.0 * d
            if i > 0:
                g[i, j] += 2.0 * (c - u[i - 1, j])
            if j + 1 < ny:
                d = u[i, j + 1] - c
                acc += d * d
                g[i, j] -= 2.0 * d
            if j > 0:
                g[i, j] += 2.0 * (c - u[i, j - 1])
        E += acc
    return E, g
