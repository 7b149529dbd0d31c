"""Sampled fields on masked grids and the weak Finsler calculus.

Differentials use second-order central stencils in the mask interior and
one-sided second-order stencils at mask-adjacent cells, so no stencil ever
reads excluded cells (where weights like 1/r may be meaningless). The weak
forms pair compactly supported test functions against vector fields by
masked midpoint quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import MaskTooThin, NonConvergence, UnsupportedPhi
from .grids import LEBESGUE, DomainMask, Grid, Measure, integrate
from .metrics import FinslerMetric


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray
    mask: DomainMask

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise ValueError("values shape does not match grid")
        if not np.isfinite(self.values[self.mask.include]).all():
            raise ValueError("non-finite values on masked cells")

    @classmethod
    def from_callable(cls, mask: DomainMask, fn: Callable, fill: float = 0.0):
        """Evaluate fn on masked cell centers; excluded cells get `fill`."""
        grid = mask.grid
        flat = np.where(mask.include.ravel())[0]
        pts = grid.points_of(flat)
        vals = np.full(grid.shape, fill, dtype=np.float64)
        vals.ravel()[flat] = np.asarray(fn(pts), dtype=np.float64)
        return cls(grid, vals, mask)

    def with_values(self, values: np.ndarray) -> "ScalarField":
        return ScalarField(self.grid, values, self.mask)

    def masked(self) -> np.ndarray:
        return self.values[self.mask.include]


@dataclass(frozen=True)
class CoVectorField:
    grid: Grid
    components: np.ndarray  # (n, *shape)
    mask: DomainMask

    def __post_init__(self):
        if self.components.shape != (self.grid.ndim,) + self.grid.shape:
            raise ValueError("component shape mismatch")
        if not np.isfinite(self.components[:, self.mask.include]).all():
            raise ValueError("non-finite components on masked cells")

    def rows(self) -> np.ndarray:
        """(N, n) components at masked cells."""
        return self.components[:, self.mask.include].T


@dataclass(frozen=True)
class VectorField:
    grid: Grid
    components: np.ndarray
    mask: DomainMask

    def __post_init__(self):
        if self.components.shape != (self.grid.ndim,) + self.grid.shape:
            raise ValueError("component shape mismatch")
        if not np.isfinite(self.components[:, self.mask.include]).all():
            raise ValueError("non-finite components on masked cells")

    def rows(self) -> np.ndarray:
        return self.components[:, self.mask.include].T


def _shift(values: np.ndarray, axis: int, step: int) -> np.ndarray:
    out = np.zeros_like(values)
    src = [slice(None)] * values.ndim
    dst = [slice(None)] * values.ndim
    if step > 0:
        src[axis] = slice(0, -step)
        dst[axis] = slice(step, None)
    else:
        src[axis] = slice(-step, None)
        dst[axis] = slice(0, step)
    out[tuple(dst)] = values[tuple(src)]
    return out


def _shift_mask(mask: np.ndarray, axis: int, step: int) -> np.ndarray:
    return _shift(mask.astype(bool), axis, step)


def differential(u: ScalarField) -> CoVectorField:
    """Du on the mask: central stencils inside, one-sided at the boundary."""
    grid = u.grid
    inc = u.mask.include
    v = np.where(inc, u.values, 0.0)
    comps = np.zeros((grid.ndim,) + grid.shape)
    for a in range(grid.ndim):
        h = grid.spacing[a]
        m_p1 = _shift_mask(inc, a, -1)
        m_m1 = _shift_mask(inc, a, 1)
        m_p2 = _shift_mask(inc, a, -2)
        m_m2 = _shift_mask(inc, a, 2)
        v_p1 = _shift(v, a, -1)
        v_m1 = _shift(v, a, 1)
        v_p2 = _shift(v, a, -2)
        v_m2 = _shift(v, a, 2)
        central = inc & m_p1 & m_m1
        forward = inc & ~central & m_p1 & m_p2
        backward = inc & ~central & ~forward & m_m1 & m_m2
        orphan = inc & ~central & ~forward & ~backward
        if orphan.any():
            raise MaskTooThin(
                f"{int(orphan.sum())} masked cells lack a second-order stencil "
                f"along axis {a}"
            )
        d = np.zeros(grid.shape)
        d[central] = (v_p1[central] - v_m1[central]) / (2 * h)
        d[forward] = (-3 * v[forward] + 4 * v_p1[forward] - v_p2[forward]) / (2 * h)
        d[backward] = (3 * v[backward] - 4 * v_m1[backward] + v_m2[backward]) / (2 * h)
        comps[a] = d
    return CoVectorField(grid, comps, u.mask)


def gradient(metric: FinslerMetric, du: CoVectorField, tol: float = 1e-10) -> VectorField:
    """Finslerian gradient: Legendre inverse of the differential, cellwise."""
    A = du.rows()
    try:
        Y = kernels.legendre_inverse_batch(metric, A, tol=tol)
    except NonConvergence as exc:
        flat = np.where(du.mask.include.ravel())[0]
        raise NonConvergence(
            f"gradient Legendre solve failed ({exc.cells} cells, first near flat "
            f"index {int(flat[0])})",
            residual=exc.residual,
            cells=exc.cells,
        ) from exc
    comps = np.zeros((du.grid.ndim,) + du.grid.shape)
    comps[:, du.mask.include] = Y.T
    return VectorField(du.grid, comps, du.mask)


def co_norm(metric: FinslerMetric, du: CoVectorField, tol: float = 1e-10) -> ScalarField:
    """F*(x, Du) cellwise via the polar transform route."""
    vals = np.zeros(du.grid.shape)
    vals[du.mask.include] = kernels.dual_norm_batch(metric, du.rows(), tol=tol)
    return ScalarField(du.grid, vals, du.mask)


def norm_field(metric: FinslerMetric, X: VectorField) -> ScalarField:
    """F(x, X) cellwise."""
    vals = np.zeros(X.grid.shape)
    vals[X.mask.include] = metric.norm_many(X.rows())
    return ScalarField(X.grid, vals, X.mask)


def pairing_values(du: CoVectorField, X: VectorField) -> np.ndarray:
    """Pointwise duality pairing Du(X)."""
    return np.einsum("a...,a...->...", du.components, X.components)


def weak_pairing(
    X: VectorField,
    phi: ScalarField,
    metric: FinslerMetric,
    measure: Measure = LEBESGUE,
) -> float:
    """Right side of the weak divergence identity: integral of Dphi(X) dm."""
    collar = phi.mask.collar
    if np.any(phi.values[collar] != 0.0):
        raise UnsupportedPhi("test function does not vanish on the mask collar")
    dphi = differential(phi)
    vals = pairing_values(dphi, X)
    return integrate(ScalarField(phi.grid, vals, phi.mask), phi.mask, measure)


def sobolev_norm(
    phi: ScalarField, metric: FinslerMetric, measure: Measure = LEBESGUE
) -> float:
    """W^{1,2}_F norm: L2 norm plus the dual-norm Dirichlet seminorm."""
    l2 = integrate(phi.with_values(phi.values**2), phi.mask, measure)
    co = co_norm(metric, differential(phi))
    h1 = integrate(co.with_values(co.values**2), phi.mask, measure)
    return float(np.sqrt(l2) + np.sqrt(h1))


@dataclass
class TestFunctionBattery:
    """Nonnegative smooth bumps compactly supported in a mask interior.

    Members are stored as patches: a ScalarField on the sub-grid covering
    the bump's support (padded so the bump vanishes on the patch rim). Weak
    forms against a battery member only ever touch its patch, which keeps
    sweeps over large grids cheap.
    """

    mask: DomainMask
    members: list[ScalarField]  # patch fields, one small grid each
    slices: list[tuple[slice, ...]]
    meta: list[dict]
    _norm_cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.members)

    def restrict_scalar(self, values: np.ndarray, i: int) -> np.ndarray:
        return values[self.slices[i]]

    def restrict_vector(self, components: np.ndarray, i: int) -> np.ndarray:
        return components[(slice(None),) + self.slices[i]]

    def pair_with(
        self,
        X: VectorField,
        i: int,
        metric: FinslerMetric,
        measure: Measure = LEBESGUE,
    ) -> float:
        """weak_pairing of a full-grid vector field against member i."""
        phi = self.members[i]
        Xp = VectorField(
            phi.grid, self.restrict_vector(X.components, i), phi.mask
        )
        return weak_pairing(Xp, phi, metric, measure)

    def source_with(self, values: np.ndarray, i: int,
                    measure: Measure = LEBESGUE) -> float:
        """integral of phi_i * values dm over the patch."""
        phi = self.members[i]
        local = phi.values * self.restrict_scalar(values, i)
        return integrate(phi.with_values(local), phi.mask, measure)

    def sobolev_norms(
        self, metric: FinslerMetric, measure: Measure = LEBESGUE
    ) -> np.ndarray:
        key = (metric.name, measure.tag)
        if key not in self._norm_cache:
            self._norm_cache[key] = np.array(
                [sobolev_norm(phi, metric, measure) for phi in self.members]
            )
        return self._norm_cache[key]

    def validate(self) -> None:
        for i, phi in enumerate(self.members):
            if (phi.values < 0).any():
                raise ValueError(f"battery member {i} is negative somewhere")
            if np.any(phi.values[phi.mask.collar] != 0.0):
                raise ValueError(f"battery member {i} is nonzero on the collar")
            if np.any(phi.values[~phi.mask.include] != 0.0):
                raise ValueError(f"battery member {i} leaks outside the mask")


def _bump_values(grid: Grid, center: np.ndarray, width: float) -> np.ndarray:
    """Tensor-product C-infinity bump, peak 1, support |x_a - c_a| < width."""
    out = np.ones(grid.shape)
    for a in range(grid.ndim):
        t = (grid.axis_centers(a) - center[a]) / width
        vals = np.zeros_like(t)
        interior = np.abs(t) < 1.0
        vals[interior] = np.exp(1.0 - 1.0 / (1.0 - t[interior] ** 2))
        shape = [1] * grid.ndim
        shape[a] = -1
        out = out * vals.reshape(shape)
    return out


def build_battery(
    mask: DomainMask,
    lattice: int = 3,
    scales: Sequence[float] = (0.85, 0.55, 0.30),
    extra_random: int = 5,
    seed: int = 20240811,
    min_width_cells: float = 2.0,
) -> TestFunctionBattery:
    """Deterministic bump battery: a lattice of centers x scales plus seeded
    random centers, widths capped by the cell clearance to the mask boundary."""
    grid = mask.grid
    h = max(grid.spacing)
    clear = ndimage.distance_transform_edt(mask.include)
    occupied = np.argwhere(mask.include)
    lo_i = occupied.min(axis=0)
    hi_i = occupied.max(axis=0)

    centers: list[tuple[int, ...]] = []
    seen = set()

    def consider(cell: tuple[int, ...]) -> None:
        if cell in seen:
            return
        if not mask.include[cell] or clear[cell] < min_width_cells + 1.5:
            return
        seen.add(cell)
        centers.append(cell)

    for combo in product(range(1, lattice + 1), repeat=grid.ndim):
        frac = np.asarray(combo, dtype=np.float64) / (lattice + 1)
        cell = tuple(np.round(lo_i + frac * (hi_i - lo_i)).astype(int))
        consider(cell)
    rng = np.random.default_rng(seed)
    eligible = np.argwhere(mask.include & (clear >= min_width_cells + 2.5))
    if len(eligible) and extra_random > 0:
        picks = rng.choice(len(eligible), size=min(extra_random, len(eligible)),
                           replace=False)
        for row in eligible[picks]:
            consider(tuple(int(i) for i in row))

    members: list[ScalarField] = []
    slices: list[tuple[slice, ...]] = []
    meta: list[dict] = []
    sqrt_n = np.sqrt(grid.ndim)
    for cell in centers:
        center = np.array(
            [grid.axis_centers(a)[cell[a]] for a in range(grid.ndim)]
        )
        max_width = (clear[cell] - 1.5) * h / sqrt_n
        for s in scales:
            width = s * max_width
            if width < min_width_cells * h:
                continue
            sl = _patch_slices(grid, cell, width)
            sub_grid = _subgrid(grid, sl)
            sub_include = mask.include[sl]
            vals = _bump_values(sub_grid, center, width)
            vals[~sub_include] = 0.0
            sub_mask = DomainMask(
                sub_grid, sub_include, mask.descriptor + "|patch", dict(mask.meta)
            )
            members.append(ScalarField(sub_grid, vals, sub_mask))
            slices.append(sl)
            meta.append({"center": tuple(center), "width": float(width)})
    if not members:
        raise ValueError("battery construction produced no members; mask too thin")
    return TestFunctionBattery(mask, members, slices, meta)


def _patch_slices(grid: Grid, cell, width: float) -> tuple[slice, ...]:
    """Sub-box around a bump support, padded and at least 8 cells wide."""
    out = []
    for a in range(grid.ndim):
        half = int(np.ceil(width / grid.spacing[a])) + 3
        lo = cell[a] - half
        hi = cell[a] + half + 1
        if hi - lo < 8:
            pad = (8 - (hi - lo) + 1) // 2
            lo -= pad
            hi += pad
        lo = max(lo, 0)
        hi = min(hi, grid.shape[a])
        if hi - lo < 8:  # clipped at the box edge; extend inward
            if lo == 0:
                hi = min(8, grid.shape[a])
            else:
                lo = max(grid.shape[a] - 8, 0)
        out.append(slice(lo, hi))
    return tuple(out)


def _subgrid(grid: Grid, sl: tuple[slice, ...]) -> Grid:
    lower = []
    upper = []
    shape = []
    for a, s in enumerate(sl):
        h = grid.spacing[a]
        lower.append(grid.lower[a] + s.start * h)
        upper.append(grid.lower[a] + s.stop * h)
        shape.append(s.stop - s.start)
    return Grid(tuple(lower), tuple(upper), tuple(shape))


def _pairing_margins(
    metric: FinslerMetric,
    grad_rho: VectorField,
    battery: TestFunctionBattery,
    measure: Measure,
) -> np.ndarray:
    norms = battery.sobolev_norms(metric, measure)
    margins = np.empty(len(battery))
    for i in range(len(battery)):
        margins[i] = battery.pair_with(grad_rho, i, metric, measure) / norms[i]
    return margins


def is_superharmonic(
    metric: FinslerMetric,
    rho: ScalarField,
    battery: TestFunctionBattery,
    tol: float,
    measure: Measure = LEBESGUE,
) -> tuple[bool, float]:
    """Weak test of -div(grad rho) >= 0: all battery pairings >= -tol.

    Margins are Sobolev-normalized; any finite battery yields only a
    necessary check, so the margin is reported rather than a proof.
    """
    grad_rho = gradient(metric, differential(rho))
    margins = _pairing_margins(metric, grad_rho, battery, measure)
    worst = float(margins.min())
    return worst >= -tol, worst


def is_subharmonic(
    metric: FinslerMetric,
    rho: ScalarField,
    battery: TestFunctionBattery,
    tol: float,
    measure: Measure = LEBESGUE,
) -> tuple[bool, float]:
    """Weak test of div(grad rho) >= 0 (pairings <= tol)."""
    grad_rho = gradient(metric, differential(rho))
    margins = -_pairing_margins(metric, grad_rho, battery, measure)
    worst = float(margins.min())
    return worst >= -tol, worst


def weak_laplacian_residual(
    metric: FinslerMetric,
    u: ScalarField,
    f: ScalarField,
    battery: TestFunctionBattery,
    measure: Measure = LEBESGUE,
) -> float:
    """Sobolev-normalized residual of the weak claim Laplacian(u) = f."""
    grad_u = gradient(metric, differential(u))
    norms = battery.sobolev_norms(metric, measure)
    worst = 0.0
    for i in range(len(battery)):
        source = battery.source_with(f.values, i, measure)
        pair = battery.pair_with(grad_u, i, metric, measure)
        worst = max(worst, abs(source + pair) / norms[i])
    return worst


def field_tolerance(grid: Grid, field_scale: float = 1.0) -> float:
    """Weak-form assertion tolerance: separates scheme error from violations."""
    h = max(grid.spacing)
    return max(1e-8, 10.0 * h * h * field_scale)
