"""Core metric abstraction: tangent/cotangent points, Finsler norms, certificates.

A FinslerMetric bundles the norm F, the fiber derivative of F^2/2, the
fundamental tensor (its Hessian) and a measure density. All zoo metrics are
Minkowski type (base-point independent), but every operation still accepts a
base point so the calculus layer is written for the general case.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import kernels
from .kernels import CUSTOM, EUCLIDEAN, RANDERS  # noqa: F401  (re-export)


def _astuple(x) -> tuple[float, ...]:
    return tuple(float(v) for v in np.asarray(x, dtype=np.float64).ravel())


def _validate_point_pair(base_point, components):
    bp = np.asarray(base_point, dtype=np.float64)
    c = np.asarray(components, dtype=np.float64)
    if bp.shape != c.shape or bp.ndim != 1:
        raise ValueError("base_point and components must be 1-d with equal length")
    if not (np.isfinite(bp).all() and np.isfinite(c).all()):
        raise ValueError("non-finite entries")
    return _astuple(bp), _astuple(c)


@dataclass(frozen=True)
class Vector:
    """Tangent vector attached to a chart point."""

    base_point: tuple[float, ...]
    components: tuple[float, ...]

    def __post_init__(self):
        bp, c = _validate_point_pair(self.base_point, self.components)
        object.__setattr__(self, "base_point", bp)
        object.__setattr__(self, "components", c)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.components)


@dataclass(frozen=True)
class CoVector:
    """Cotangent vector attached to a chart point."""

    base_point: tuple[float, ...]
    components: tuple[float, ...]

    def __post_init__(self):
        bp, c = _validate_point_pair(self.base_point, self.components)
        object.__setattr__(self, "base_point", bp)
        object.__setattr__(self, "components", c)

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.components)

    def __call__(self, vector) -> float:
        v = vector.array if isinstance(vector, Vector) else np.asarray(vector)
        return float(np.dot(self.array, v))


def _as_components(x, dimension: int) -> np.ndarray:
    if isinstance(x, (Vector, CoVector)):
        arr = x.array
    else:
        arr = np.asarray(x, dtype=np.float64)
    if arr.shape != (dimension,):
        raise ValueError(f"expected {dimension} components, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class FinslerMetric:
    """Positively 1-homogeneous strongly convex norm family.

    ``kind`` selects the kernel family (EUCLIDEAN / RANDERS / CUSTOM);
    ``params`` carries the closed-form parameters (the Randers drift). For
    CUSTOM kinds the vectorized callables _norm_fn/_grad_fn/_hess_fn do the
    work and the numba backend is bypassed.
    """

    dimension: int
    kind: int
    params: np.ndarray
    name: str
    _norm_fn: Callable = field(repr=False)
    _grad_fn: Callable = field(repr=False)
    _hess_fn: Callable = field(repr=False)
    density_fn: Optional[Callable] = field(default=None, repr=False)
    is_minkowski: bool = True

    # -- spec surface: pointwise maps ------------------------------------
    def eval(self, x, y) -> float:
        """F(x, y); defined as 0 at y = 0 by continuity."""
        yv = _as_components(y, self.dimension)
        return float(self.norm_many(yv[None, :])[0])

    def hessian(self, x, y) -> np.ndarray:
        """Fundamental tensor g_ij(x, y); callers must not pass y = 0."""
        yv = _as_components(y, self.dimension)
        if not np.any(yv):
            raise ValueError("hessian undefined at y = 0")
        return kernels.hessian_batch(self, yv[None, :])[0]

    def density(self, x) -> float:
        """Measure density sigma_F at x (1 when no density callback is set)."""
        if self.density_fn is None:
            return 1.0
        return float(self.density_fn(np.asarray(x, dtype=np.float64)))

    # -- batched access used by the field calculus -----------------------
    def norm_many(self, Y: np.ndarray) -> np.ndarray:
        return kernels.norm_batch(self, Y)

    def legendre_many(self, Y: np.ndarray) -> np.ndarray:
        return kernels.legendre_batch(self, Y)

    def hessian_many(self, Y: np.ndarray) -> np.ndarray:
        return kernels.hessian_batch(self, Y)

    def legendre_inverse_many(self, A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        return kernels.legendre_inverse_batch(self, A, tol=tol)

    def dual_norm_many(self, A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
        return kernels.dual_norm_batch(self, A, tol=tol)


DECLARED = "declared"
ESTIMATED = "estimated"


@dataclass
class MetricCertificate:
    """Geometric constants of a metric, with per-field provenance.

    Inequality checks that need r_F < infinity consume the declared value
    when present, else the estimate. ``curvature_bound``, the mean-covariation
    flag and ``ricci_lower`` stay None when nothing is declared (custom
    norms); distance-based checks then refuse to run.
    """

    reversibility: float
    uniformity_lo: float
    uniformity_hi: float
    curvature_bound: Optional[float]
    vanishing_mean_covariation: Optional[bool]
    ricci_lower: Optional[float]
    provenance: dict[str, str]
    tolerances: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not (self.reversibility >= 1.0):
            raise ValueError("reversibility constant must be >= 1")
        if not (0.0 < self.uniformity_lo <= self.uniformity_hi):
            raise ValueError("uniformity constants must satisfy 0 < lo <= hi")
        for key, prov in self.provenance.items():
            if prov not in (DECLARED, ESTIMATED):
                raise ValueError(f"bad provenance {prov!r} for {key!r}")
            if prov == ESTIMATED and key not in self.tolerances:
                raise ValueError(f"estimated field {key!r} needs a tolerance")

    @property
    def reversible(self) -> bool:
        return self.reversibility == 1.0
