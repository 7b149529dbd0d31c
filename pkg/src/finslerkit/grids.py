"""Cell-centered structured grids, domain masks and masked quadrature.

A cell belongs to a domain iff its center satisfies the descriptor
predicate; cut cells are never fraction-weighted (inner approximation in
the sense that no partial cells enter the quadrature). Integration is the
midpoint rule against the metric measure, reduced with pairwise summation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateDomain, EmptyMask
from .kernels import pairwise_sum


@dataclass(frozen=True)
class Grid:
    """Axis-aligned box split into cells; fields live at cell centers."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        lo = np.asarray(self.lower, dtype=np.float64)
        up = np.asarray(self.upper, dtype=np.float64)
        if not (up > lo).all():
            raise ValueError("upper corner must exceed lower corner componentwise")
        if min(self.shape) < 8:
            raise ValueError("resolution must be at least 8 cells per axis")
        object.__setattr__(self, "lower", tuple(float(v) for v in lo))
        object.__setattr__(self, "upper", tuple(float(v) for v in up))
        object.__setattr__(self, "shape", tuple(int(m) for m in self.shape))

    @classmethod
    def centered_cube(cls, half_width: float, resolution: int, ndim: int) -> "Grid":
        return cls((-half_width,) * ndim, (half_width,) * ndim, (resolution,) * ndim)

    @property
    def ndim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (u - l) / m for l, u, m in zip(self.lower, self.upper, self.shape)
        )

    @property
    def h(self) -> float:
        """Uniform spacing; raises when axes differ (most ops assume cubes)."""
        hs = self.spacing
        if max(hs) - min(hs) > 1e-12 * max(hs):
            raise ValueError("grid spacing is anisotropic; use .spacing")
        return hs[0]

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def axis_centers(self, axis: int) -> np.ndarray:
        m = self.shape[axis]
        h = self.spacing[axis]
        return self.lower[axis] + (np.arange(m) + 0.5) * h

    def meshes(self) -> list[np.ndarray]:
        """Sparse (broadcastable) center coordinate arrays, one per axis."""
        return list(
            np.meshgrid(*[self.axis_centers(a) for a in range(self.ndim)],
                        indexing="ij", sparse=True)
        )

    def radius_from(self, x0=None) -> np.ndarray:
        """Euclidean distance of every cell center from x0 (default origin)."""
        x0 = np.zeros(self.ndim) if x0 is None else np.asarray(x0, dtype=np.float64)
        r2 = np.zeros(self.shape)
        for a, c in enumerate(self.meshes()):
            r2 = r2 + (c - x0[a]) ** 2
        return np.sqrt(r2)

    def points_of(self, flat_index: np.ndarray) -> np.ndarray:
        """(N, n) coordinates of cells given by flat indices."""
        idx = np.unravel_index(flat_index, self.shape)
        return np.stack(
            [self.axis_centers(a)[idx[a]] for a in range(self.ndim)], axis=-1
        )


def _shift_bool(mask: np.ndarray, axis: int, step: int) -> np.ndarray:
    """Mask shifted by step along axis; out-of-range treated as excluded."""
    out = np.zeros_like(mask)
    src = [slice(None)] * mask.ndim
    dst = [slice(None)] * mask.ndim
    if step > 0:
        src[axis] = slice(0, -step)
        dst[axis] = slice(step, None)
    else:
        src[axis] = slice(-step, None)
        dst[axis] = slice(0, step)
    out[tuple(dst)] = mask[tuple(src)]
    return out


@dataclass(frozen=True)
class DomainMask:
    """Boolean inclusion array over a grid plus its descriptor."""

    grid: Grid
    include: np.ndarray
    descriptor: str
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.include.shape != self.grid.shape:
            raise ValueError("mask shape does not match grid")
        if not self.interior.any():
            raise DegenerateDomain(f"domain {self.descriptor!r} has empty interior")

    @property
    def collar(self) -> np.ndarray:
        """Cells of the mask with at least one face neighbour outside it."""
        inner = self.include.copy()
        for a in range(self.grid.ndim):
            inner &= _shift_bool(self.include, a, 1) & _shift_bool(self.include, a, -1)
        return self.include & ~inner

    @property
    def interior(self) -> np.ndarray:
        return self.include & ~self.collar

    def count(self) -> int:
        return int(self.include.sum())

    def __contains__(self, other: "DomainMask") -> bool:
        return bool((~self.include[other.include]).sum() == 0)


@dataclass(frozen=True)
class Measure:
    """Volume form dm = sigma_F dx; density None means Lebesgue."""

    density: Optional[Callable] = None
    tag: str = "lebesgue"

    def values_on(self, grid: Grid, include: np.ndarray) -> Optional[np.ndarray]:
        if self.density is None:
            return None
        pts = grid.points_of(np.where(include.ravel())[0])
        vals = np.asarray(self.density(pts), dtype=np.float64)
        if (vals <= 0).any():
            raise ValueError("measure density must be positive on the grid")
        return vals


LEBESGUE = Measure()


def integrate(f, mask: DomainMask, measure: Measure = LEBESGUE) -> float:
    """Midpoint rule of a ScalarField or ndarray over the masked cells."""
    values = f.values if hasattr(f, "values") else np.asarray(f)
    if values.shape != mask.grid.shape:
        raise ValueError("field shape does not match the mask's grid")
    if not mask.include.any():
        raise EmptyMask("integration mask includes no cells")
    v = values[mask.include]
    if not np.isfinite(v).all():
        raise ValueError("non-finite integrand on the mask")
    sigma = measure.values_on(mask.grid, mask.include)
    if sigma is not None:
        v = v * sigma
    return pairwise_sum(v) * mask.grid.cell_volume


# -- domain descriptors --------------------------------------------------


@dataclass(frozen=True)
class Ball:
    radius: float
    center: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class Annulus:
    inner: float
    outer: float
    center: Optional[tuple[float, ...]] = None


@dataclass(frozen=True)
class PuncturedBall:
    radius: float
    center: Optional[tuple[float, ...]] = None
    excise: Optional[float] = None  # default 3h at build time


@dataclass(frozen=True)
class PuncturedBox:
    excise: Optional[float] = None


@dataclass(frozen=True)
class RSublevel:
    level: float = 1.0
    exclude_band: float = 0.0  # half-width of |log r| ring to drop, in log units


@dataclass(frozen=True)
class RSuperlevel:
    level: float = 1.0
    truncation: Optional[float] = None  # Euclidean truncation radius
    exclude_band: float = 0.0


@dataclass(frozen=True)
class BoxDomain:
    pass


@dataclass(frozen=True)
class CustomDomain:
    predicate: Callable  # points (N, n) -> bool (N,)
    name: str = "custom"


def build_domain(descriptor, grid: Grid, r_field=None) -> DomainMask:
    """Mask per descriptor. r-level sets require the metric distance field."""
    h = max(grid.spacing)
    if isinstance(descriptor, Ball):
        r = grid.radius_from(descriptor.center)
        return DomainMask(grid, r < descriptor.radius, f"ball({descriptor.radius})")
    if isinstance(descriptor, Annulus):
        r = grid.radius_from(descriptor.center)
        inc = (r >= descriptor.inner) & (r <= descriptor.outer)
        return DomainMask(
            grid, inc, f"annulus({descriptor.inner},{descriptor.outer})"
        )
    if isinstance(descriptor, PuncturedBall):
        r = grid.radius_from(descriptor.center)
        excise = 3.0 * h if descriptor.excise is None else descriptor.excise
        inc = (r < descriptor.radius) & (r > excise)
        return DomainMask(
            grid,
            inc,
            f"punctured_ball({descriptor.radius})",
            {"excise_radius": excise},
        )
    if isinstance(descriptor, PuncturedBox):
        r = grid.radius_from(None)
        excise = 3.0 * h if descriptor.excise is None else descriptor.excise
        return DomainMask(
            grid, r > excise, "punctured_box", {"excise_radius": excise}
        )
    if isinstance(descriptor, RSublevel):
        if r_field is None:
            raise ValueError("r_sublevel requires the distance field")
        r = r_field.values
        inc = r < descriptor.level
        if descriptor.exclude_band > 0:
            with np.errstate(divide="ignore"):
                inc &= np.abs(np.log(np.maximum(r, 1e-300) / descriptor.level)) >= (
                    descriptor.exclude_band
                )
        return DomainMask(
            grid,
            inc,
            f"r_sublevel({descriptor.level})",
            {"exclude_band": descriptor.exclude_band},
        )
    if isinstance(descriptor, RSuperlevel):
        if r_field is None:
            raise ValueError("r_superlevel requires the distance field")
        r = r_field.values
        inc = r > descriptor.level
        if descriptor.exclude_band > 0:
            inc &= np.abs(np.log(np.maximum(r, 1e-300) / descriptor.level)) >= (
                descriptor.exclude_band
            )
        meta = {"exclude_band": descriptor.exclude_band, "truncated_by": "grid box"}
        if descriptor.truncation is not None:
            inc &= grid.radius_from(None) < descriptor.truncation
            meta["truncation_radius"] = descriptor.truncation
        return DomainMask(grid, inc, f"r_superlevel({descriptor.level})", meta)
    if isinstance(descriptor, BoxDomain):
        return DomainMask(grid, np.ones(grid.shape, dtype=bool), "box")
    if isinstance(descriptor, CustomDomain):
        pts = grid.points_of(np.arange(int(np.prod(grid.shape))))
        inc = np.asarray(descriptor.predicate(pts), dtype=bool).reshape(grid.shape)
        return DomainMask(grid, inc, descriptor.name)
    raise TypeError(f"unknown domain descriptor {descriptor!r}")
