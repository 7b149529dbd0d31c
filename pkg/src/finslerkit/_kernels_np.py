"""Pure-numpy batched kernels.

Reference implementations of the hot numeric loops. All solvers operate on
row batches: Y and A are (N, n) arrays of tangent / cotangent components.
The numba twins in ``_kernels_nb`` implement the same algorithms for the
builtin metric kinds; this module stays fully general (any vectorized norm
callable), so it also serves custom metrics.
"""

from __future__ import annotations

import numpy as np

from .errors import NonConvergence

EUCLIDEAN = 0
RANDERS = 1
CUSTOM = 2

_TINY = 1e-300


def closed_forms(kind: int, params: np.ndarray):
    """Vectorized (norm, half_sq_grad, half_sq_hess) closures for builtin kinds.

    half_sq_grad is the fiber derivative of F^2/2, half_sq_hess its Hessian
    (the fundamental tensor g_ij). Rows with y = 0 map to F = 0 and zero
    derivative; the Hessian must not be requested at 0.
    """
    if kind == EUCLIDEAN:

        def norm(Y):
            return np.sqrt((Y * Y).sum(-1))

        def grad(Y):
            return np.array(Y, dtype=np.float64, copy=True)

        def hess(Y):
            N, n = Y.shape
            return np.broadcast_to(np.eye(n), (N, n, n)).copy()

        return norm, grad, hess

    if kind == RANDERS:
        b = np.asarray(params, dtype=np.float64)

        def norm(Y):
            return np.sqrt((Y * Y).sum(-1)) + Y @ b

        def grad(Y):
            ny = np.sqrt((Y * Y).sum(-1))
            safe = np.maximum(ny, _TINY)
            ell = Y / safe[..., None] + b
            F = ny + Y @ b
            out = F[..., None] * ell
            out[ny == 0.0] = 0.0
            return out

        def hess(Y):
            ny = np.sqrt((Y * Y).sum(-1))
            if np.any(ny == 0.0):
                raise ValueError("Randers Hessian undefined at y = 0")
            yhat = Y / ny[..., None]
            ell = yhat + b
            F = ny + Y @ b
            n = Y.shape[-1]
            eye = np.eye(n)
            proj = eye - yhat[..., :, None] * yhat[..., None, :]
            return (
                ell[..., :, None] * ell[..., None, :]
                + (F / ny)[..., None, None] * proj
            )

        return norm, grad, hess

    raise ValueError(f"no closed forms for kind {kind}")


def fd_grad_from_norm(norm_fn, rel_step: float = 1e-6):
    """Central-difference fiber derivative of F^2/2 built from a norm callable."""

    def grad(Y):
        Y = np.asarray(Y, dtype=np.float64)
        ny = np.sqrt((Y * Y).sum(-1))
        h = rel_step * np.maximum(ny, 1.0)
        out = np.zeros_like(Y)
        n = Y.shape[-1]
        for i in range(n):
            E = np.zeros_like(Y)
            E[..., i] = h
            fp = norm_fn(Y + E)
            fm = norm_fn(Y - E)
            out[..., i] = (fp * fp - fm * fm) / (4.0 * h)
        out[ny == 0.0] = 0.0
        return out

    return grad


def fd_hess_from_grad(grad_fn, rel_step: float = 1e-4):
    """Central-difference Hessian of F^2/2 from its gradient callable."""

    def hess(Y):
        Y = np.asarray(Y, dtype=np.float64)
        ny = np.sqrt((Y * Y).sum(-1))
        h = rel_step * np.maximum(ny, 1.0)
        n = Y.shape[-1]
        H = np.zeros(Y.shape + (n,))
        for j in range(n):
            E = np.zeros_like(Y)
            E[..., j] = h
            H[..., :, j] = (grad_fn(Y + E) - grad_fn(Y - E)) / (2.0 * h)[..., None]
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    return hess


def legendre_inverse_batch(
    norm_fn,
    grad_fn,
    hess_fn,
    A,
    tol: float = 1e-10,
    max_iter: int = 200,
    max_halvings: int = 50,
):
    """Solve J(y) = alpha rowwise by damped Newton on F^2/2 - alpha(y).

    Initialized from the Euclidean dual of alpha. The merit function is the
    strictly convex dual objective, so the damped Newton direction always
    admits a decreasing step.
    """
    A = np.asarray(A, dtype=np.float64)
    single = A.ndim == 1
    A2 = np.atleast_2d(A)
    N, n = A2.shape
    Y = A2.copy()
    anorm = np.sqrt((A2 * A2).sum(1))
    scale = np.maximum(anorm, 1.0)
    active = anorm > 0.0
    Y[~active] = 0.0

    def merit(Yv, Av):
        F = norm_fn(Yv)
        return 0.5 * F * F - (Yv * Av).sum(1)

    for _ in range(max_iter):
        rows = np.where(active)[0]
        if rows.size == 0:
            break
        Ya = Y[rows]
        R = grad_fn(Ya) - A2[rows]
        done = np.abs(R).max(1) <= tol * scale[rows]
        if done.any():
            active[rows[done]] = False
            rows = rows[~done]
            if rows.size == 0:
                continue
            Ya = Ya[~done]
            R = R[~done]
        H = hess_fn(Ya)
        try:
            dY = np.linalg.solve(H, -R[..., None])[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NonConvergence(
                "singular fundamental tensor in Legendre inverse"
            ) from exc
        Av = A2[rows]
        m0 = merit(Ya, Av)
        gdot = (R * dY).sum(1)
        # rounding slack: near the optimum the true decrease drops below
        # float64 resolution of the merit; accept the quadratic step then
        slack = 1e-14 * (1.0 + np.abs(m0))
        t = np.ones(rows.size)
        Yt = Ya + dY
        mt = merit(Yt, Av)
        for _h in range(max_halvings):
            bad = mt > m0 + 1e-4 * t * gdot + slack
            if not bad.any():
                break
            t[bad] *= 0.5
            Yt[bad] = Ya[bad] + t[bad, None] * dY[bad]
            mt[bad] = merit(Yt[bad], Av[bad])
        Y[rows] = Yt

    if active.any():
        rows = np.where(active)[0]
        R = grad_fn(Y[rows]) - A2[rows]
        raise NonConvergence(
            f"Legendre inverse failed on {rows.size} of {N} rows",
            residual=float(np.abs(R).max()),
            cells=int(rows.size),
        )
    return Y[0] if single else Y


def _tangent_basis(D):
    """Orthonormal basis of the tangent space at unit rows D, via Householder."""
    N, n = D.shape
    v = D.copy()
    s = np.where(D[:, 0] >= 0.0, 1.0, -1.0)
    v[:, 0] += s
    vv = (v * v).sum(1)
    H = np.broadcast_to(np.eye(n), (N, n, n)).copy()
    H -= 2.0 * v[:, :, None] * v[:, None, :] / vv[:, None, None]
    return H[:, :, 1:]


def sphere_maximize_batch(
    objective_fn,
    D0,
    tol: float = 1e-10,
    max_iter: int = 60,
    fd_step: float = 1e-3,
    max_halvings: int = 30,
):
    """Maximize a 0-homogeneous objective over unit directions, rowwise.

    ``objective_fn(D, rows)`` receives candidate directions for the original
    rows listed in ``rows`` (row-dependent objectives index their data by it).
    Damped Newton in a local chart g(u) = normalize(d + U u) with
    finite-difference derivatives; re-centers every iteration. Returns
    (values, directions, converged). Convergence: relative value stall
    below tol on two consecutive iterations.
    """
    D = np.asarray(D0, dtype=np.float64).copy()
    D /= np.maximum(np.sqrt((D * D).sum(1)), _TINY)[:, None]
    N, n = D.shape
    m = n - 1
    val = objective_fn(D, np.arange(N))
    active = np.ones(N, dtype=bool)
    stall = np.zeros(N, dtype=np.int64)

    for _ in range(max_iter):
        rows = np.where(active)[0]
        if rows.size == 0:
            break
        Da = D[rows]
        U = _tangent_basis(Da)

        def f_at(u_local):
            G = Da + np.einsum("rij,rj->ri", U, u_local)
            G /= np.maximum(np.sqrt((G * G).sum(1)), _TINY)[:, None]
            return objective_fn(G, rows), G

        e = fd_step
        f0 = val[rows]
        grad = np.zeros((rows.size, m))
        hess = np.zeros((rows.size, m, m))
        fp = np.zeros((rows.size, m))
        fm = np.zeros((rows.size, m))
        for i in range(m):
            u = np.zeros((rows.size, m))
            u[:, i] = e
            fp[:, i], _ = f_at(u)
            u[:, i] = -e
            fm[:, i], _ = f_at(u)
            grad[:, i] = (fp[:, i] - fm[:, i]) / (2 * e)
            hess[:, i, i] = (fp[:, i] + fm[:, i] - 2 * f0) / (e * e)
        for i in range(m):
            for j in range(i + 1, m):
                u = np.zeros((rows.size, m))
                u[:, i] = e
                u[:, j] = e
                fpp, _ = f_at(u)
                u[:, j] = -e
                fpm, _ = f_at(u)
                u[:, i] = -e
                u[:, j] = e
                fmp, _ = f_at(u)
                u[:, j] = -e
                fmm, _ = f_at(u)
                hij = (fpp - fpm - fmp + fmm) / (4 * e * e)
                hess[:, i, j] = hij
                hess[:, j, i] = hij

        # Newton step for a maximum; fall back to scaled ascent when the
        # Hessian is not usable.
        du = np.zeros((rows.size, m))
        try:
            du = np.linalg.solve(-hess, grad[..., None])[..., 0]
        except np.linalg.LinAlgError:
            du[:] = 0.0
        ascent = (du * grad).sum(1) > 0.0
        gn = np.sqrt((grad * grad).sum(1))
        fallback = ~ascent & (gn > 0)
        if fallback.any():
            du[fallback] = grad[fallback] / np.maximum(gn[fallback], _TINY)[:, None] * 0.1
        # keep the chart step well inside its validity region
        dn = np.sqrt((du * du).sum(1))
        big = dn > 0.5
        if big.any():
            du[big] *= (0.5 / dn[big])[:, None]

        t = np.ones(rows.size)
        ft, Gt = f_at(du)
        for _h in range(max_halvings):
            bad = ft < f0
            if not bad.any():
                break
            t[bad] *= 0.5
            ftb, Gtb = f_at(t[:, None] * du)
            ft = np.where(bad, ftb, ft)
            Gt = np.where(bad[:, None], Gtb, Gt)

        improved = ft >= f0
        newval = np.where(improved, ft, f0)
        D[rows] = np.where(improved[:, None], Gt, Da)
        rel = np.abs(newval - val[rows]) / np.maximum(1.0, np.abs(newval))
        stall[rows] = np.where(rel <= tol, stall[rows] + 1, 0)
        val[rows] = newval
        active[rows[stall[rows] >= 2]] = False

    return val, D, stall >= 2


def dual_norm_batch(
    norm_fn,
    A,
    tol: float = 1e-10,
    max_iter: int = 60,
    extra_starts: int = 0,
    rng_seed: int = 20210,
):
    """Polar transform F*(alpha) rowwise: sup of alpha(y) over {F(y) = 1}.

    Sphere-chart damped Newton on alpha(d)/F(d), started from the Euclidean
    dual direction; optional extra deterministic starts guard against bad
    initialization (the objective has a unique maximum for strongly convex F,
    so one start suffices on valid metrics).
    """
    A = np.asarray(A, dtype=np.float64)
    single = A.ndim == 1
    A2 = np.atleast_2d(A)
    N, n = A2.shape
    anorm = np.sqrt((A2 * A2).sum(1))
    out = np.zeros(N)
    nz = anorm > 0.0
    if nz.any():
        Ahat = A2[nz] / anorm[nz][:, None]

        def objective(D, rows):
            return (Ahat[rows] * D).sum(1) / norm_fn(D)

        best, _, _ = sphere_maximize_batch(objective, Ahat, tol=tol, max_iter=max_iter)
        if extra_starts > 0:
            rng = np.random.default_rng(rng_seed)
            for _ in range(extra_starts):
                D0 = rng.standard_normal(Ahat.shape)
                D0 /= np.sqrt((D0 * D0).sum(1))[:, None]
                v, _, _ = sphere_maximize_batch(objective, D0, tol=tol, max_iter=max_iter)
                best = np.maximum(best, v)
        out[nz] = anorm[nz] * best
    return out[0] if single else out


def pairwise_sum(values: np.ndarray) -> float:
    """Deterministic reduction; numpy's add.reduce is pairwise on float64."""
    return float(np.add.reduce(np.ascontiguousarray(values, dtype=np.float64)))
