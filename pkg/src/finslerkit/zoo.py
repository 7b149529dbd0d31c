"""Concrete Minkowski-type metrics with analytically known certificates.

All zoo metrics are base-point independent with Lebesgue measure (density 1):
on a Minkowski space every constant density gives vanishing mean covariation
and zero flag curvature, so the distance-based inequality checks apply with
declared constants. The Randers family is the canonical non-reversible
example; its closed-form dual norm and reversibility constant make every
solver output checkable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import _kernels_np as knp
from .duality import estimate_reversibility, estimate_uniformity
from .errors import InvalidSpec, NotMinkowski
from .fields import ScalarField
from .grids import DomainMask, Grid
from .metrics import (
    CUSTOM,
    DECLARED,
    ESTIMATED,
    EUCLIDEAN,
    RANDERS,
    FinslerMetric,
    MetricCertificate,
)


@dataclass(frozen=True)
class EuclideanSpec:
    n: int


@dataclass(frozen=True)
class RandersSpec:
    n: int
    b: tuple[float, ...]


@dataclass(frozen=True)
class CustomNormSpec:
    n: int
    norm: Callable  # vectorized: (N, n) -> (N,)
    grad: Optional[Callable] = None  # fiber derivative of F^2/2
    hess: Optional[Callable] = None
    name: str = "custom"


def randers_dual_norm(b: np.ndarray, A: np.ndarray) -> np.ndarray:
    """Closed-form dual of F(y) = |y| + b.y; used as a test oracle."""
    A = np.atleast_2d(np.asarray(A, dtype=np.float64))
    bb = float(b @ b)
    ba = A @ b
    an2 = (A * A).sum(-1)
    return (np.sqrt((1.0 - bb) * an2 + ba * ba) - ba) / (1.0 - bb)


def _screen_custom(metric: FinslerMetric, samples: int = 1000, seed: int = 777) -> None:
    """Homogeneity and positive-definiteness screen for caller-supplied norms."""
    rng = np.random.default_rng(seed)
    Y = rng.standard_normal((samples, metric.dimension))
    Y /= np.sqrt((Y * Y).sum(1))[:, None]
    F = metric.norm_many(Y)
    if not (F > 0).all():
        raise InvalidSpec("custom norm is not positive on nonzero directions")
    lam = rng.uniform(0.1, 10.0, size=samples)
    F_scaled = metric.norm_many(lam[:, None] * Y)
    if np.any(np.abs(F_scaled - lam * F) > 1e-12 * (1.0 + lam * F)):
        raise InvalidSpec("custom norm fails positive 1-homogeneity sampling")
    H = metric.hessian_many(Y)
    eigs = np.linalg.eigvalsh(H)
    if not (eigs[:, 0] > 0).all():
        raise InvalidSpec("custom norm Hessian not positive definite on samples")


def build_metric(spec) -> tuple[FinslerMetric, MetricCertificate]:
    """Metric with density 1 plus its certificate (declared where analytic)."""
    if isinstance(spec, EuclideanSpec):
        if spec.n < 2:
            raise InvalidSpec("Euclidean spec needs n >= 2")
        norm, grad, hess = knp.closed_forms(EUCLIDEAN, np.zeros(spec.n))
        metric = FinslerMetric(
            dimension=spec.n,
            kind=EUCLIDEAN,
            params=np.zeros(spec.n),
            name=f"euclidean(n={spec.n})",
            _norm_fn=norm,
            _grad_fn=grad,
            _hess_fn=hess,
        )
        cert = MetricCertificate(
            reversibility=1.0,
            uniformity_lo=1.0,
            uniformity_hi=1.0,
            curvature_bound=0.0,
            vanishing_mean_covariation=True,
            ricci_lower=0.0,
            provenance={k: DECLARED for k in (
                "reversibility", "uniformity_lo", "uniformity_hi",
                "curvature_bound", "vanishing_mean_covariation", "ricci_lower",
            )},
        )
        return metric, cert

    if isinstance(spec, RandersSpec):
        b = np.asarray(spec.b, dtype=np.float64)
        if spec.n < 2 or b.shape != (spec.n,):
            raise InvalidSpec("Randers drift dimension mismatch")
        bnorm = float(np.sqrt(b @ b))
        if bnorm >= 1.0:
            raise InvalidSpec(f"Randers drift must satisfy |b| < 1, got {bnorm}")
        norm, grad, hess = knp.closed_forms(RANDERS, b)
        metric = FinslerMetric(
            dimension=spec.n,
            kind=RANDERS,
            params=b,
            name=f"randers(n={spec.n},b={tuple(float(x) for x in b)})",
            _norm_fn=norm,
            _grad_fn=grad,
            _hess_fn=hess,
        )
        lo, hi = estimate_uniformity(metric)
        cert = MetricCertificate(
            reversibility=(1.0 + bnorm) / (1.0 - bnorm),
            uniformity_lo=lo,
            uniformity_hi=hi,
            curvature_bound=0.0,
            vanishing_mean_covariation=True,
            ricci_lower=0.0,
            provenance={
                "reversibility": DECLARED,
                "uniformity_lo": ESTIMATED,
                "uniformity_hi": ESTIMATED,
                "curvature_bound": DECLARED,
                "vanishing_mean_covariation": DECLARED,
                "ricci_lower": DECLARED,
            },
            tolerances={"uniformity_lo": 1e-6, "uniformity_hi": 1e-6},
        )
        return metric, cert

    if isinstance(spec, CustomNormSpec):
        if spec.n < 2:
            raise InvalidSpec("custom spec needs n >= 2")
        norm = spec.norm
        grad = spec.grad if spec.grad is not None else knp.fd_grad_from_norm(norm)
        hess = spec.hess if spec.hess is not None else knp.fd_hess_from_grad(grad)
        metric = FinslerMetric(
            dimension=spec.n,
            kind=CUSTOM,
            params=np.zeros(spec.n),
            name=f"{spec.name}(n={spec.n})",
            _norm_fn=norm,
            _grad_fn=grad,
            _hess_fn=hess,
        )
        _screen_custom(metric)
        r_est = estimate_reversibility(metric)
        lo, hi = estimate_uniformity(metric)
        cert = MetricCertificate(
            reversibility=r_est,
            uniformity_lo=lo,
            uniformity_hi=hi,
            curvature_bound=None,
            vanishing_mean_covariation=None,
            ricci_lower=None,
            provenance={
                "reversibility": ESTIMATED,
                "uniformity_lo": ESTIMATED,
                "uniformity_hi": ESTIMATED,
            },
            tolerances={
                "reversibility": 1e-4,
                "uniformity_lo": 1e-4,
                "uniformity_hi": 1e-4,
            },
        )
        return metric, cert

    raise InvalidSpec(f"unknown metric spec {spec!r}")


def minkowski_distance_field(
    metric: FinslerMetric, x0, mask_or_grid
) -> ScalarField:
    """Distance field r(x) = d_F(x0, x) = F(x - x0) on a Minkowski space.

    Straight segments realize the infimum over curves, so the field is a
    pointwise norm evaluation. Satisfies the eikonal identity up to the
    differentiation scheme's error away from x0.
    """
    if not metric.is_minkowski:
        raise NotMinkowski("distance field requires a base-point independent metric")
    if isinstance(mask_or_grid, Grid):
        grid = mask_or_grid
        mask = DomainMask(grid, np.ones(grid.shape, dtype=bool), "box")
    else:
        mask = mask_or_grid
        grid = mask.grid
    x0 = np.asarray(x0, dtype=np.float64)
    # evaluated on the whole grid so r-level masks can be built from it
    pts = grid.points_of(np.arange(int(np.prod(grid.shape))))
    vals = metric.norm_many(pts - x0).reshape(grid.shape)
    return ScalarField(grid, vals, mask)
