"""Variational estimators: best Hardy constant, sharpness probe, 2-capacity,
Poincare constant.

Descent discretization: minimizations use the forward-difference (link)
Dirichlet energy rather than the central form, because central differences
admit checkerboard null modes that a minimizer would exploit. Plain
quotients and probes evaluate the central-difference operators of the field
calculus on smooth trial fields, where both forms agree to second order.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from . import kernels
from .errors import ConstantField, DegenerateK, ZeroDenominator
from .fields import ScalarField, co_norm, differential
from .grids import LEBESGUE, Ball, DomainMask, Grid, Measure, build_domain, integrate
from .metrics import EUCLIDEAN, FinslerMetric


@dataclass
class RayleighResult:
    estimate: float
    minimizer: ScalarField
    trace: list[float]
    converged: bool

    def __post_init__(self):
        if self.estimate < 0.25 - 1e-6:
            # theory floor for the Hardy quotient; a violation means a bug
            raise ValueError(f"Rayleigh estimate {self.estimate} below 1/4")


@dataclass
class CapacityResult:
    estimate: float
    per_radius: dict[float, float]
    monotone: bool
    classification: str
    meta: dict = field(default_factory=dict)


def _dirichlet_weight(
    metric: FinslerMetric, rho: ScalarField, mask: DomainMask
) -> np.ndarray:
    """Denominator weight (1/rho^2) F*^2(D rho) on the mask."""
    co = co_norm(metric, differential(rho))
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(mask.include, (co.values / rho.values) ** 2, 0.0)
    if not np.isfinite(q[mask.include]).all():
        raise ZeroDenominator("denominator weight is singular on the mask")
    return q


def rayleigh_quotient(
    metric: FinslerMetric,
    u: ScalarField,
    rho: ScalarField,
    mask: DomainMask,
    measure: Measure = LEBESGUE,
) -> float:
    """Central-difference quotient int F*^2(Du) / int (u/rho)^2 F*^2(D rho)."""
    q = _dirichlet_weight(metric, rho, mask)
    den = integrate(u.with_values(q * u.values**2), mask, measure)
    if den <= 0.0:
        raise ZeroDenominator("quotient denominator vanished")
    co_u = co_norm(metric, differential(u))
    num = integrate(u.with_values(co_u.values**2), mask, measure)
    return num / den


def _link_energy(metric: FinslerMetric, u: np.ndarray, grid: Grid):
    """Forward-difference energy int F*^2(Du) dm and its gradient in u.

    Euclidean metrics use the fused link kernel. General metrics build the
    per-cell forward-difference covector, apply the Legendre inverse and
    assemble the adjoint; fields are assumed to vanish near the box boundary
    (enforced by the callers' Dirichlet sets).
    """
    h = grid.h
    if metric.kind == EUCLIDEAN:
        return kernels.link_energy_grad(u, h)
    ndim = grid.ndim
    vol = grid.cell_volume
    shape = grid.shape
    # forward-difference covector per cell, zero at the top slice
    B = np.zeros((ndim,) + shape)
    for a in range(ndim):
        sl_lo = [slice(None)] * ndim
        sl_lo[a] = slice(0, -1)
        B[a][tuple(sl_lo)] = np.diff(u, axis=a) / h
    beta = B.reshape(ndim, -1).T
    Fstar = kernels.dual_norm_batch(metric, beta)
    E = float((Fstar**2).sum() * vol)
    Ystar = kernels.legendre_inverse_batch(metric, beta)
    G = Ystar.T.reshape((ndim,) + shape)
    g = np.zeros_like(u)
    for a in range(ndim):
        sl_lo = [slice(None)] * ndim
        sl_lo[a] = slice(0, -1)
        sl_hi = [slice(None)] * ndim
        sl_hi[a] = slice(1, None)
        g[tuple(sl_lo)] -= 2.0 * vol / h * G[a][tuple(sl_lo)]
        g[tuple(sl_hi)] += 2.0 * vol / h * G[a][tuple(sl_lo)]
    return E, g


def _support_set(mask: DomainMask) -> np.ndarray:
    """Cells where a compactly supported field may be nonzero."""
    return mask.interior


def minimize_rayleigh(
    metric: FinslerMetric,
    rho: ScalarField,
    mask: DomainMask,
    init: ScalarField,
    max_iters: int = 400,
    step_rule: str = "exact",
    measure: Measure = LEBESGUE,
    rel_tol: float = 1e-8,
) -> RayleighResult:
    """Projected descent on the Hardy quotient over compactly supported fields.

    Each step moves along the negative quotient gradient of the link-energy
    functional, re-imposes the compact-support collar and accepts the step
    only on decrease (exact rational line search in the Euclidean case,
    backtracking otherwise).
    """
    grid = mask.grid
    vol = grid.cell_volume
    support = _support_set(mask)
    q = _dirichlet_weight(metric, rho, mask)

    u = np.where(support, init.values, 0.0)
    den = float((q * u * u).sum() * vol)
    if den <= 0.0:
        raise ZeroDenominator("initial field has zero denominator")

    E, gE = _link_energy(metric, u, grid)
    Q = E / den
    trace = [Q]
    stall = 0
    converged = False
    for _ in range(max_iters):
        gD = 2.0 * vol * q * u
        g = (gE - Q * gD) / den
        g[~support] = 0.0
        gnorm2 = float((g * g).sum())
        if gnorm2 == 0.0:
            converged = True
            break
        d = -g
        if metric.kind == EUCLIDEAN and step_rule == "exact":
            # N and D are quadratic along the ray: minimize the rational form
            Ed, _ = _link_energy(metric, d, grid)
            a0, a1, a2 = E, 0.5 * float((gE * d).sum()), Ed
            Dd = float((q * d * d).sum() * vol)
            b0 = den
            b1 = float((q * u * d).sum() * vol)
            b2 = Dd
            # d/dt [(a0+2a1 t+a2 t^2)/(b0+2b1 t+b2 t^2)] = 0
            A = a1 * b2 - a2 * b1
            Bq = (a0 * b2 - a2 * b0) / 2.0
            C = a0 * b1 - a1 * b0
            t = 0.0
            if A != 0.0:
                disc = Bq * Bq - A * C
                if disc >= 0.0:
                    for cand in (
                        (-Bq + np.sqrt(disc)) / A,
                        (-Bq - np.sqrt(disc)) / A,
                    ):
                        if cand > 0.0 and (t == 0.0 or cand < t):
                            t = cand
            if t == 0.0:
                t = den / max(2.0 * Ed, 1e-300)
        else:
            Ed, _ = _link_energy(metric, d, grid)
            t = den / max(2.0 * Ed, 1e-300)
        accepted = False
        for _h in range(40):
            u_new = u + t * d
            u_new[~support] = 0.0
            den_new = float((q * u_new * u_new).sum() * vol)
            if den_new > 0.0:
                E_new, gE_new = _link_energy(metric, u_new, grid)
                Q_new = E_new / den_new
                if Q_new <= Q * (1.0 + 1e-14):
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            converged = True
            break
        rel = abs(Q - Q_new) / max(abs(Q), 1e-300)
        u, den, E, gE, Q = u_new, den_new, E_new, gE_new, min(Q, Q_new)
        trace.append(Q)
        stall = stall + 1 if rel < rel_tol else 0
        if stall >= 10:
            converged = True
            break

    snapshot = ScalarField(grid, u, mask)
    return RayleighResult(Q, snapshot, trace, converged)


def _smoothstep(t: np.ndarray) -> np.ndarray:
    s = np.clip(t, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def sharpness_probe(
    metric: FinslerMetric,
    rho: ScalarField,
    mask: DomainMask,
    collar_widths: Sequence[float],
    measure: Measure = LEBESGUE,
) -> list[float]:
    """Quotients of sqrt(rho) times smooth cutoffs with the given collar widths.

    The sequence is reported as evidence only: when sqrt(rho) falls outside
    the homogeneous Sobolev space no convergence claim is made.
    """
    grid = mask.grid
    h = max(grid.spacing)
    dist = ndimage.distance_transform_edt(mask.include) * h
    out = []
    rho_pos = np.where(mask.include, np.maximum(rho.values, 0.0), 0.0)
    for w in collar_widths:
        eta = _smoothstep(dist / max(w, h))
        u = ScalarField(grid, np.sqrt(rho_pos) * eta, mask)
        out.append(rayleigh_quotient(metric, u, rho, mask, measure))
    return out


def capacity_estimate(
    metric: FinslerMetric,
    K_mask: DomainMask,
    outer_radii: Sequence[float],
    grid: Grid,
    max_iters: int = 200,
    rel_tol: float = 1e-7,
    measure: Measure = LEBESGUE,
) -> CapacityResult:
    """Condenser approximations of Cap_2(K, M) with growing outer shells.

    For each outer radius R the quadratic energy int F*^2(Du) dm is
    minimized over 0 <= u <= 1 with u = 1 on K and u = 0 outside the
    Euclidean R-ball, by clamped conjugate descent started from the
    harmonic condenser profile of the equivalent-volume ball. The true
    capacity is the decreasing limit in R; only the trend is reported.
    """
    if K_mask.count() == 0:
        raise DegenerateK("capacity of an empty set requested")
    grid_r = grid.radius_from(None)
    if measure.density is not None:
        raise NotImplementedError("capacity currently assumes Lebesgue measure")
    ndim = grid.ndim
    h = grid.h
    K = K_mask.include
    k_vol = K.sum() * grid.cell_volume
    if ndim == 3:
        eps_hat = max((3.0 * k_vol / (4.0 * np.pi)) ** (1.0 / 3.0), 0.315 * h)
    else:
        eps_hat = max(np.sqrt(k_vol / np.pi), 0.4 * h)
    max_r = float(grid_r[K].max())

    per_radius: dict[float, float] = {}
    for R in outer_radii:
        if R <= max_r:
            raise DegenerateK(f"outer radius {R} does not contain K")
        outer = grid_r >= R
        free = ~K & ~outer
        with np.errstate(divide="ignore"):
            if ndim == 3:
                prof = (1.0 / np.maximum(grid_r, 1e-12) - 1.0 / R) / (
                    1.0 / eps_hat - 1.0 / R
                )
            else:
                prof = np.log(np.maximum(R / np.maximum(grid_r, 1e-12), 1e-12)) / np.log(
                    R / eps_hat
                )
        u = np.clip(prof, 0.0, 1.0)
        u[K] = 1.0
        u[outer] = 0.0
        per_radius[float(R)] = _minimize_condenser(
            metric, u, free, grid, max_iters, rel_tol
        )

    values = list(per_radius.values())
    monotone = all(
        values[i + 1] <= values[i] * (1.0 + 1e-6) for i in range(len(values) - 1)
    )
    drop = (values[0] - values[-1]) / values[0] if values[0] > 0 else 0.0
    classification = "parabolic-trend" if drop > 0.3 else "hyperbolic-trend"
    return CapacityResult(
        estimate=values[-1],
        per_radius=per_radius,
        monotone=monotone,
        classification=classification,
        meta={"eps_hat": eps_hat, "heuristic": "trend drop > 30% flags parabolic"},
    )


def _minimize_condenser(
    metric: FinslerMetric,
    u: np.ndarray,
    free: np.ndarray,
    grid: Grid,
    max_iters: int,
    rel_tol: float,
) -> float:
    """Clamped conjugate descent on the link energy with Dirichlet sets fixed."""
    E, g = _link_energy(metric, u, grid)
    g[~free] = 0.0
    d = -g
    g_old2 = float((g * g).sum())
    stall = 0
    for _ in range(max_iters):
        if g_old2 == 0.0:
            break
        Ed, _ = _link_energy(metric, d, grid)
        denom = 2.0 * Ed
        gd = float((g * d).sum())
        t = -gd / max(denom, 1e-300)
        if t <= 0.0:
            d = -g
            continue
        accepted = False
        for _h in range(30):
            u_new = np.clip(u + t * d, 0.0, 1.0)
            u_new[~free] = u[~free]
            E_new, g_new = _link_energy(metric, u_new, grid)
            if E_new <= E * (1.0 + 1e-14):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        clamped = bool((np.abs(u_new - (u + t * d)) > 1e-15)[free].any())
        rel = abs(E - E_new) / max(E, 1e-300)
        u, E = u_new, E_new
        g_new[~free] = 0.0
        g_new2 = float((g_new * g_new).sum())
        if clamped:
            d = -g_new  # restart conjugacy when the clamp was active
        else:
            beta = g_new2 / max(g_old2, 1e-300)
            d = -g_new + beta * d
        g, g_old2 = g_new, g_new2
        stall = stall + 1 if rel < rel_tol else 0
        if stall >= 10:
            break
    return E


def poincare_constant_probe(
    metric: FinslerMetric,
    ball_mask: DomainMask,
    battery,
    measure: Measure = LEBESGUE,
) -> float:
    """Certified lower bound for the Poincare constant on a ball.

    Max over the battery of ||u - mean(u)||_2 / ||F*(Du)||_2. Members here
    need no compact support (Neumann-type quotient); a member with Du = 0
    is rejected.
    """
    members = getattr(battery, "members", battery)
    if not len(members):
        raise ValueError("empty battery")
    volume = integrate(
        ScalarField(ball_mask.grid, np.ones(ball_mask.grid.shape), ball_mask),
        ball_mask, measure,
    )
    best = 0.0
    for u in members:
        mean = integrate(u, ball_mask, measure) / volume
        num = integrate(
            u.with_values((u.values - mean) ** 2), ball_mask, measure
        )
        co = co_norm(metric, differential(u))
        den = integrate(u.with_values(co.values**2), ball_mask, measure)
        if den <= 0.0:
            raise ConstantField("battery member with identically zero differential")
        best = max(best, float(np.sqrt(num / den)))
    return best
