"""Backend dispatch for the batched kernels.

Builtin metric kinds (Euclidean, Randers) run numba kernels when the numba
backend is active; custom-callback metrics and the numpy backend use the
reference implementations in ``_kernels_np``.
"""

from __future__ import annotations

import numpy as np

from . import _kernels_np as knp
from .backend import use_numba
from .errors import NonConvergence

EUCLIDEAN = knp.EUCLIDEAN
RANDERS = knp.RANDERS
CUSTOM = knp.CUSTOM


def _nb():
    from . import _kernels_nb as knb

    return knb


def _builtin(metric) -> bool:
    return metric.kind in (EUCLIDEAN, RANDERS)


def _params(metric) -> np.ndarray:
    if metric.kind == RANDERS:
        return np.ascontiguousarray(metric.params, dtype=np.float64)
    return np.zeros(metric.dimension)


def norm_batch(metric, Y: np.ndarray) -> np.ndarray:
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if _builtin(metric) and use_numba():
        return _nb().norm_batch(metric.kind, _params(metric), Y)
    return metric._norm_fn(Y)


def legendre_batch(metric, Y: np.ndarray) -> np.ndarray:
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if _builtin(metric) and use_numba():
        return _nb().legendre_batch(metric.kind, _params(metric), Y)
    return metric._grad_fn(Y)


def hessian_batch(metric, Y: np.ndarray) -> np.ndarray:
    Y = np.ascontiguousarray(Y, dtype=np.float64)
    if _builtin(metric) and use_numba():
        return _nb().hessian_batch(metric.kind, _params(metric), Y)
    return metric._hess_fn(Y)


def legendre_inverse_batch(
    metric, A: np.ndarray, tol: float = 1e-10, max_iter: int = 200
) -> np.ndarray:
    A = np.ascontiguousarray(A, dtype=np.float64)
    single = A.ndim == 1
    A2 = np.atleast_2d(A)
    if metric.kind == EUCLIDEAN:
        out = A2.copy()
        return out[0] if single else out
    if _builtin(metric) and use_numba():
        Y, res = _nb().legendre_inverse_batch(
            metric.kind, _params(metric), A2, tol, max_iter, 50
        )
        bad = res > tol
        if bad.any():
            raise NonConvergence(
                f"Legendre inverse failed on {int(bad.sum())} of {len(res)} rows",
                residual=float(res.max()),
                cells=int(bad.sum()),
            )
        return Y[0] if single else Y
    out = knp.legendre_inverse_batch(
        metric._norm_fn, metric._grad_fn, metric._hess_fn, A2, tol=tol, max_iter=max_iter
    )
    return out[0] if single else out


def dual_norm_batch(
    metric, A: np.ndarray, tol: float = 1e-10, max_iter: int = 60
) -> np.ndarray:
    A = np.ascontiguousarray(A, dtype=np.float64)
    single = A.ndim == 1
    A2 = np.atleast_2d(A)
    if metric.kind == EUCLIDEAN:
        out = np.sqrt((A2 * A2).sum(1))
        return out[0] if single else out
    if _builtin(metric) and use_numba():
        out = _nb().dual_norm_batch(metric.kind, _params(metric), A2, tol, max_iter)
        return out[0] if single else out
    out = knp.dual_norm_batch(metric._norm_fn, A2, tol=tol, max_iter=max_iter)
    return out[0] if single else out


def link_energy_grad(u: np.ndarray, h: float):
    """Euclidean link Dirichlet energy sum (du)^2 h^(n-2) and gradient."""
    ndim = u.ndim
    if use_numba() and ndim == 3:
        return _nb().link_energy_grad_3d(np.ascontiguousarray(u), h)
    if use_numba() and ndim == 2:
        return _nb().link_energy_grad_2d(np.ascontiguousarray(u), h)
    factor = h ** (ndim - 2)
    E = 0.0
    g = np.zeros_like(u)
    for a in range(ndim):
        d = np.diff(u, axis=a)
        E += (d * d).sum()
        lo = [slice(None)] * ndim
        hi = [slice(None)] * ndim
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        g[tuple(lo)] -= 2.0 * factor * d
        g[tuple(hi)] += 2.0 * factor * d
    return E * factor, g


pairwise_sum = knp.pairwise_sum
