"""Convex-duality operations: polar transform, Legendre maps, metric constants."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import kernels
from ._kernels_np import sphere_maximize_batch
from .errors import NonConvergence
from .metrics import CoVector, FinslerMetric, Vector, _as_components

_DIRECTION_SEED = 53101


def _unit_sample(n: int, count: int, seed: int = _DIRECTION_SEED) -> np.ndarray:
    rng = np.random.default_rng(seed)
    D = rng.standard_normal((count, n))
    D /= np.maximum(np.sqrt((D * D).sum(1)), 1e-300)[:, None]
    return D


def polar_transform(
    metric: FinslerMetric,
    alpha,
    tol: float = 1e-10,
    sample: int = 128,
    starts: int = 4,
) -> float:
    """F*(x, alpha) = sup { alpha(y) : F(x, y) = 1 }.

    Multi-start damped Newton on the sphere chart of the indicatrix
    constraint: objective alpha(d)/F(d) over unit Euclidean directions d,
    started from the Euclidean dual of alpha and from the best directions of
    a deterministic sphere sample.
    """
    a = _as_components(alpha, metric.dimension)
    anorm = float(np.sqrt(a @ a))
    if anorm == 0.0:
        return 0.0
    ahat = a / anorm

    def objective(D, rows):
        return (D @ ahat) / metric.norm_many(D)

    D0 = _unit_sample(metric.dimension, sample)
    vals0 = objective(D0, np.arange(len(D0)))
    order = np.argsort(vals0)[::-1][: max(starts - 1, 0)]
    starts_D = np.vstack([ahat[None, :], D0[order]])
    best, _, converged = sphere_maximize_batch(objective, starts_D, tol=tol)
    if not converged.any():
        raise NonConvergence("polar transform Newton did not converge from any start")
    return anorm * float(best.max())


def legendre(metric: FinslerMetric, y) -> CoVector:
    """J(x, y): the differential of F^2/2 at y (zero vector maps to zero)."""
    base = y.base_point if isinstance(y, Vector) else (0.0,) * metric.dimension
    yv = _as_components(y, metric.dimension)
    a = kernels.legendre_batch(metric, yv[None, :])[0]
    return CoVector(base, tuple(a))


def legendre_inverse(metric: FinslerMetric, alpha, tol: float = 1e-10) -> Vector:
    """J*(x, alpha): the unique maximizer of alpha(y) - F^2(x, y)/2.

    Damped Newton with the fundamental tensor as Jacobian, initialized from
    the Euclidean dual of alpha; residual tolerance in covector components.
    """
    base = alpha.base_point if isinstance(alpha, CoVector) else (0.0,) * metric.dimension
    av = _as_components(alpha, metric.dimension)
    yv = kernels.legendre_inverse_batch(metric, av[None, :], tol=tol)[0]
    return Vector(base, tuple(yv))


def estimate_reversibility(
    metric: FinslerMetric,
    sample_points: Optional[Sequence] = None,
    directions: int = 10_000,
    seed: int = _DIRECTION_SEED,
    refine_top: int = 8,
) -> float:
    """Certified lower bound for r_F = sup F(y)/F(-y).

    Dense sphere sweep followed by multi-start local ascent from the best
    directions. Minkowski metrics need a single base point; the sweep runs
    per supplied point otherwise.
    """
    if sample_points is None:
        sample_points = [np.zeros(metric.dimension)]
    if len(sample_points) == 0:
        raise ValueError("sample_points must be nonempty")

    def objective(D, rows):
        return metric.norm_many(D) / metric.norm_many(-D)

    D0 = _unit_sample(metric.dimension, directions, seed)
    vals = objective(D0, np.arange(len(D0)))
    order = np.argsort(vals)[::-1][:refine_top]
    refined, _, _ = sphere_maximize_batch(objective, D0[order], tol=1e-12)
    return float(max(vals.max(), refined.max()))


def estimate_dual_reversibility(
    metric: FinslerMetric, directions: int = 10_000, seed: int = _DIRECTION_SEED
) -> float:
    """r_{F*} estimated through the polar transform (equals r_F in theory)."""
    D0 = _unit_sample(metric.dimension, directions, seed)
    plus = kernels.dual_norm_batch(metric, D0)
    minus = kernels.dual_norm_batch(metric, -D0)
    vals = plus / minus
    order = np.argsort(vals)[::-1][:8]

    def objective(D, rows):
        return kernels.dual_norm_batch(metric, D) / kernels.dual_norm_batch(metric, -D)

    refined, _, _ = sphere_maximize_batch(objective, D0[order], tol=1e-12, max_iter=40)
    return float(max(vals.max(), refined.max()))


def _uniformity_ratio(metric: FinslerMetric, V: np.ndarray, Y: np.ndarray) -> np.ndarray:
    G = kernels.hessian_batch(metric, V)
    quad = np.einsum("ri,rij,rj->r", Y, G, Y)
    F = metric.norm_many(Y)
    return quad / (F * F)


def estimate_uniformity(
    metric: FinslerMetric,
    sample_points: Optional[Sequence] = None,
    samples: int = 4096,
    seed: int = _DIRECTION_SEED,
    refine_rounds: int = 3,
) -> tuple[float, float]:
    """(lambda, Lambda): extremal values of g_v(y, y) / F^2(y) over unit pairs.

    Dense sampling over direction pairs, then alternating sphere-chart ascent
    in v and y from the extremal candidates.
    """
    if sample_points is None:
        sample_points = [np.zeros(metric.dimension)]
    if len(sample_points) == 0:
        raise ValueError("sample_points must be nonempty")
    n = metric.dimension
    V = _unit_sample(n, samples, seed)
    Y = _unit_sample(n, samples, seed + 1)
    vals = _uniformity_ratio(metric, V, Y)

    def refine(idx: int, sign: float) -> float:
        v = V[idx : idx + 1].copy()
        y = Y[idx : idx + 1].copy()
        best = sign * vals[idx]
        for _ in range(refine_rounds):
            vy, y, _ = sphere_maximize_batch(
                lambda D, rows: sign * _uniformity_ratio(metric, np.repeat(v, len(D), 0), D),
                y,
                tol=1e-12,
                max_iter=30,
            )
            vv, v, _ = sphere_maximize_batch(
                lambda D, rows: sign * _uniformity_ratio(metric, D, np.repeat(y, len(D), 0)),
                v,
                tol=1e-12,
                max_iter=30,
            )
            best = max(best, float(vy[0]), float(vv[0]))
        return sign * best

    hi = refine(int(np.argmax(vals)), +1.0)
    lo = refine(int(np.argmin(vals)), -1.0)
    return float(min(lo, vals.min())), float(max(hi, vals.max()))
