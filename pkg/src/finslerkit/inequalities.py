"""Hardy-type inequality checkers: evaluate both sides, report margins.

Conventions shared by every checker:

* ``lhs`` and ``rhs`` are the raw integrals of the displayed inequality;
  the multiplicative constant is attached separately together with the side
  it applies to, never folded in silently.
* ``margin`` and ``ratio`` compare the applied sides (constant times its
  side), so ``passed`` means margin >= -tol with
  tol = max(1e-10, 20 h^2 max(|applied sides|)).
* Failed *hypotheses* give a distinguished report status
  ("hypothesis_violated", passed = None): an inequality is neither
  confirmed nor refuted when its premises do not hold.
* Local integrability premises are checked as finiteness of the masked
  integrals; that is a sampled surrogate, not a proof.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    BadExponent,
    CurvatureUnverified,
    DomainMismatch,
    ExponentInconsistent,
    InfiniteReversibility,
)
from .fields import (
    ScalarField,
    TestFunctionBattery,
    VectorField,
    co_norm,
    differential,
    gradient,
    is_subharmonic,
    is_superharmonic,
    norm_field,
    weak_pairing,
)
from .grids import LEBESGUE, DomainMask, Measure, integrate
from .metrics import FinslerMetric, MetricCertificate
from .zoo import minkowski_distance_field

HARDY_CORE = "HARDY_CORE"
WEIGHTED_HARDY = "WEIGHTED_HARDY"
CACCIOPPOLI = "CACCIOPPOLI"
DIST_HARDY = "DIST_HARDY"
DIST_HARDY_BASIC = "DIST_HARDY_BASIC"
LOG_HARDY = "LOG_HARDY"
LEMMA_CORE = "LEMMA_CORE"
LEMMA_GENERAL = "LEMMA_GENERAL"
GN = "GN"
HPW = "HPW"

THEOREM_IDS = (
    HARDY_CORE, WEIGHTED_HARDY, CACCIOPPOLI, DIST_HARDY, DIST_HARDY_BASIC,
    LOG_HARDY, LEMMA_CORE, LEMMA_GENERAL, GN, HPW,
)

STATUS_OK = "ok"
STATUS_HYPOTHESIS = "hypothesis_violated"


@dataclass
class InequalityReport:
    theorem_id: str
    metric_name: str
    n: int
    params: dict
    lhs: float
    rhs: float
    constant: float
    constant_side: str  # "lhs" | "rhs"
    ratio: float
    margin: float
    tol: float
    passed: Optional[bool]
    status: str
    hypothesis_checks: dict[str, bool] = field(default_factory=dict)
    hypothesis_margins: dict[str, float] = field(default_factory=dict)
    extras: dict = field(default_factory=dict)
    grid_h: float = float("nan")

    def to_json_dict(self) -> dict:
        def clean(x):
            if isinstance(x, float) and not np.isfinite(x):
                return None
            if isinstance(x, (np.floating, np.integer)):
                return x.item()
            if isinstance(x, np.bool_):
                return bool(x)
            if isinstance(x, (list, tuple)):
                return [clean(v) for v in x]
            if isinstance(x, dict):
                return {k: clean(v) for k, v in x.items()}
            return x

        return {
            "theorem_id": self.theorem_id,
            "metric": self.metric_name,
            "n": self.n,
            "params": clean(self.params),
            "lhs": clean(self.lhs),
            "rhs": clean(self.rhs),
            "constant": clean(self.constant),
            "constant_side": self.constant_side,
            "ratio": clean(self.ratio),
            "margin": clean(self.margin),
            "tol": clean(self.tol),
            "passed": self.passed,
            "status": self.status,
            "hypothesis_checks": clean(self.hypothesis_checks),
            "hypothesis_margins": clean(self.hypothesis_margins),
            "extras": clean(self.extras),
            "grid_h": clean(self.grid_h),
        }


@dataclass
class WeightPair:
    """Vector field X with a nonnegative density f_X (the core lemma's data).

    The construction from a weight rho follows the regularized recipe
    X = (1-theta) grad(rho_a) / rho_a^(1-theta),
    f_X = (1-theta)^2 F*^2(D rho_a) / rho_a^(2-theta) with rho_a = rho + a.
    """

    X: VectorField
    f_X: ScalarField
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if (self.f_X.masked() < 0).any():
            raise ValueError("f_X must be nonnegative on the mask")


def weight_pair_from_rho(
    metric: FinslerMetric,
    rho: ScalarField,
    theta: float = 0.0,
    shift: float = 0.0,
) -> WeightPair:
    mask = rho.mask
    rho_a = np.where(mask.include, rho.values + shift, 1.0)
    du = differential(rho)
    G = gradient(metric, du)
    co = co_norm(metric, du)
    one_minus = 1.0 - theta
    with np.errstate(divide="ignore", invalid="ignore"):
        xs = np.where(mask.include, one_minus / rho_a**one_minus, 0.0)
        fv = np.where(
            mask.include, one_minus**2 * co.values**2 / rho_a ** (2.0 - theta), 0.0
        )
    X = VectorField(rho.grid, G.components * xs, mask)
    f = ScalarField(rho.grid, fv, mask)
    return WeightPair(X, f, {"theta": theta, "shift": shift})


def _masked(values: np.ndarray, mask: DomainMask) -> ScalarField:
    return ScalarField(mask.grid, np.where(mask.include, values, 0.0), mask)


def _finite_integral(values: np.ndarray, mask: DomainMask, measure: Measure):
    """(is_finite, value) of the masked integral; infinities flag integrability."""
    v = values[mask.include]
    if not np.isfinite(v).all():
        return False, float("nan")
    return True, integrate(_masked(values, mask), mask, measure)


def report_tolerance(grid_h: float, applied_lhs: float, applied_rhs: float) -> float:
    scale = max(abs(applied_lhs), abs(applied_rhs))
    return max(1e-10, 20.0 * grid_h * grid_h * scale)


def _assemble(
    theorem_id: str,
    metric: FinslerMetric,
    mask: DomainMask,
    params: dict,
    lhs: float,
    rhs: float,
    constant: float,
    constant_side: str,
    checks: dict[str, bool],
    margins: dict[str, float],
    extras: dict,
) -> InequalityReport:
    h = max(mask.grid.spacing)
    applied_lhs = constant * lhs if constant_side == "lhs" else lhs
    applied_rhs = constant * rhs if constant_side == "rhs" else rhs
    tol = report_tolerance(h, applied_lhs, applied_rhs)
    margin = applied_rhs - applied_lhs
    ratio = applied_rhs / applied_lhs if applied_lhs > 0 else float("inf")
    violated = not all(checks.values())
    return InequalityReport(
        theorem_id=theorem_id,
        metric_name=metric.name,
        n=metric.dimension,
        params=params,
        lhs=lhs,
        rhs=rhs,
        constant=constant,
        constant_side=constant_side,
        ratio=ratio,
        margin=margin,
        tol=tol,
        passed=None if violated else bool(margin >= -tol),
        status=STATUS_HYPOTHESIS if violated else STATUS_OK,
        hypothesis_checks=checks,
        hypothesis_margins=margins,
        extras=extras,
        grid_h=h,
    )


def _hypothesis_tol(mask: DomainMask, scale: float = 1.0) -> float:
    h = max(mask.grid.spacing)
    return max(1e-8, 10.0 * h * h * scale)


def _pair_hypothesis_margin(
    metric: FinslerMetric,
    pair: WeightPair,
    battery: TestFunctionBattery,
    measure: Measure,
) -> float:
    """Worst Sobolev-normalized margin of f_X <= -div X over the battery."""
    norms = battery.sobolev_norms(metric, measure)
    worst = np.inf
    for i in range(len(battery)):
        lhs = battery.source_with(pair.f_X.values, i, measure)
        rhs = battery.pair_with(pair.X, i, metric, measure)
        worst = min(worst, (rhs - lhs) / norms[i])
    return float(worst)


def _cached(cache, key, compute):
    """Memoize expensive hypothesis sweeps across checks sharing rho/battery."""
    if cache is None:
        return compute()
    if key not in cache:
        cache[key] = compute()
    return cache[key]


def _co_of_rho(metric, rho, cache):
    key = ("co_rho", id(rho), metric.name)
    return _cached(cache, key, lambda: co_norm(metric, differential(rho)))


def _harmonicity(metric, rho, battery, tol, measure, cache, sign):
    checker = is_superharmonic if sign > 0 else is_subharmonic
    key = ("harm", sign, id(rho), id(battery), metric.name, measure.tag)
    return _cached(
        cache, key, lambda: checker(metric, rho, battery, tol, measure)
    )


def _pair_margin_cached(metric, pair, battery, measure, cache, key_extra=None):
    key = ("pair", id(pair.X), metric.name, measure.tag, key_extra)
    return _cached(
        cache, key, lambda: _pair_hypothesis_margin(metric, pair, battery, measure)
    )


def check_lemma_core(
    metric: FinslerMetric,
    pair: WeightPair,
    u: ScalarField,
    mask: DomainMask,
    battery: TestFunctionBattery,
    measure: Measure = LEBESGUE,
    cache: Optional[dict] = None,
) -> InequalityReport:
    """Core divergence lemma: int u^2 f_X <= 4 int (F^2(X)/f_X) F^2(grad u)."""
    checks: dict[str, bool] = {}
    margins: dict[str, float] = {}
    pm = _pair_margin_cached(metric, pair, battery, measure, cache)
    tol = _hypothesis_tol(mask)
    checks["f_X_le_minus_div_X"] = pm >= -tol
    margins["f_X_le_minus_div_X"] = pm

    FX = norm_field(metric, pair.X)
    fvals = pair.f_X.values
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(fvals > 0, FX.values**2 / fvals,
                         np.where(FX.values == 0, 0.0, np.inf))
    ok_w, _ = _finite_integral(ratio, mask, measure)
    checks["F2X_over_fX_integrable"] = ok_w

    grad_u = gradient(metric, differential(u))
    Fgu = norm_field(metric, grad_u)
    lhs = integrate(_masked(u.values**2 * fvals, mask), mask, measure)
    ok_r, rhs = _finite_integral(ratio * Fgu.values**2, mask, measure)
    checks["rhs_integrable"] = ok_r
    if not ok_r:
        rhs = float("nan")
    return _assemble(
        LEMMA_CORE, metric, mask, dict(pair.meta), lhs, rhs, 4.0, "rhs",
        checks, margins, {},
    )


def check_hardy_core(
    metric: FinslerMetric,
    rho: ScalarField,
    u: ScalarField,
    mask: DomainMask,
    battery: TestFunctionBattery,
    measure: Measure = LEBESGUE,
    cache: Optional[dict] = None,
) -> InequalityReport:
    """Superharmonic-weight Hardy: int (u/rho)^2 F*^2(D rho) <= 4 int F^2(grad u)."""
    if (rho.masked() < 0).any():
        raise ValueError("weight rho must be nonnegative on the mask")
    checks: dict[str, bool] = {}
    margins: dict[str, float] = {}
    tol = _hypothesis_tol(mask)
    ok, m = _harmonicity(metric, rho, battery, tol, measure, cache, +1)
    checks["superharmonic"] = ok
    margins["superharmonic"] = m

    co = _co_of_rho(metric, rho, cache)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs_integrand = (u.values**2 / rho.values**2) * co.values**2
    ok_l, lhs = _finite_integral(
        np.where(mask.include, lhs_integrand, 0.0), mask, measure
    )
    checks["weight_integrable"] = ok_l
    grad_u = gradient(metric, differential(u))
    rhs = integrate(
        _masked(norm_field(metric, grad_u).values ** 2, mask), mask, measure
    )
    if not ok_l:
        lhs = float("nan")
    return _assemble(
        HARDY_CORE, metric, mask, {}, lhs, rhs, 4.0, "rhs", checks, margins, {},
    )


def check_weighted_hardy(
    metric: FinslerMetric,
    cert: MetricCertificate,
    rho: ScalarField,
    u: ScalarField,
    theta: float,
    mask: DomainMask,
    battery: TestFunctionBattery,
    measure: Measure = LEBESGUE,
    reg_shifts: tuple[float, ...] = (1e-2, 1e-3, 1e-4),
    cache: Optional[dict] = None,
) -> InequalityReport:
    """Weighted Hardy with rho^theta weights; constant degrades by r_F^2 for theta > 1."""
    if (rho.masked() < 0).any():
        raise ValueError("weight rho must be nonnegative on the mask")
    checks: dict[str, bool] = {}
    margins: dict[str, float] = {}
    tol = _hypothesis_tol(mask)
    params = {"theta": theta}

    if theta > 1.0:
        if not np.isfinite(cert.reversibility):
            raise InfiniteReversibility(
                "theta > 1 requires a finite reversibility constant"
            )
        constant = (1.0 - theta) ** 2 / (4.0 * cert.reversibility**2)
    else:
        constant = (1.0 - theta) ** 2 / 4.0

    if theta == 1.0:
        # zero constant: the displayed inequality is trivial
        grad_u = gradient(metric, differential(u))
        rho_w = np.where(mask.include, rho.values, 1.0)
        rhs = integrate(
            _masked(rho_w * norm_field(metric, grad_u).values ** 2, mask),
            mask, measure,
        )
        co = _co_of_rho(metric, rho, cache)
        with np.errstate(divide="ignore", invalid="ignore"):
            lhs_int = rho_w ** (theta - 2.0) * u.values**2 * co.values**2
        _, lhs = _finite_integral(np.where(mask.include, lhs_int, 0.0), mask, measure)
        return _assemble(
            WEIGHTED_HARDY, metric, mask, params, lhs, rhs, 0.0, "lhs",
            {"trivial_theta_1": True}, {}, {},
        )

    ok, m = _harmonicity(
        metric, rho, battery, tol, measure, cache, +1 if theta < 1.0 else -1
    )
    checks["signed_superharmonic"] = ok
    margins["signed_superharmonic"] = m

    co = _co_of_rho(metric, rho, cache)
    rho_w = np.where(mask.include, rho.values, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight_int = co.values**2 / rho_w ** (2.0 - theta)
        theta_int = rho_w**theta
    ok_w, _ = _finite_integral(np.where(mask.include, weight_int, 0.0), mask, measure)
    ok_t, _ = _finite_integral(np.where(mask.include, theta_int, 0.0), mask, measure)
    checks["weight_integrable"] = ok_w
    checks["rho_theta_integrable"] = ok_t

    with np.errstate(divide="ignore", invalid="ignore"):
        lhs_int = (u.values**2 / rho_w**2) * co.values**2 * theta_int
    ok_l, lhs = _finite_integral(np.where(mask.include, lhs_int, 0.0), mask, measure)
    checks["lhs_integrable"] = ok_l
    grad_u = gradient(metric, differential(u))
    rhs = integrate(
        _masked(theta_int * norm_field(metric, grad_u).values ** 2, mask),
        mask, measure,
    )

    # regularized pair trend: lhs evaluated with rho + shift, plus the core
    # lemma's pair hypothesis at each level
    lhs_reg = []
    pair_margins = []
    for shift in reg_shifts:
        rs = rho_w + shift
        with np.errstate(divide="ignore", invalid="ignore"):
            reg_int = rs ** (theta - 2.0) * u.values**2 * co.values**2
        okr, v = _finite_integral(np.where(mask.include, reg_int, 0.0), mask, measure)
        lhs_reg.append(v if okr else float("nan"))
        pair = _cached(
            cache,
            ("pair_rho", id(rho), theta, shift, metric.name),
            lambda: weight_pair_from_rho(metric, rho, theta=theta, shift=shift),
        )
        pair_margins.append(
            _pair_margin_cached(metric, pair, battery, measure, cache)
        )
    checks["regularized_pair"] = all(pm >= -tol for pm in pair_margins)
    margins["regularized_pair"] = float(min(pair_margins))
    extras = {
        "reg_shifts": list(reg_shifts),
        "lhs_regularized": lhs_reg,
        "pair_margins": pair_margins,
    }
    if not ok_l:
        lhs = float("nan")
    return _assemble(
        WEIGHTED_HARDY, metric, mask, params, lhs, rhs, constant, "lhs",
        checks, margins, extras,
    )


def check_caccioppoli(
    metric: FinslerMetric,
    cert: MetricCertificate,
    rho: ScalarField,
    u: ScalarField,
    q: float,
    mask: DomainMask,
    battery: TestFunctionBattery,
    measure: Measure = LEBESGUE,
    cache: Optional[dict] = None,
) -> InequalityReport:
    """Caccioppoli-type bound for subharmonic rho with rho^q weights."""
    if q <= -1.0:
        raise BadExponent(f"Caccioppoli requires q > -1, got {q}")
    if not np.isfinite(cert.reversibility):
        raise InfiniteReversibility("Caccioppoli requires r_F < infinity")
    checks: dict[str, bool] = {}
    margins: dict[str, float] = {}
    tol = _hypothesis_tol(mask)
    ok, m = _harmonicity(metric, rho, battery, tol, measure, cache, -1)
    checks["subharmonic"] = ok
    margins["subharmonic"] = m

    co = _co_of_rho(metric, rho, cache)
    rho_w = np.where(mask.include, rho.values, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs_int = rho_w**q * co.values**2 * u.values**2
        rhs_weight = rho_w ** (2.0 + q)
    ok_l, lhs = _finite_integral(np.where(mask.include, lhs_int, 0.0), mask, measure)
    ok_t, _ = _finite_integral(np.where(mask.include, rhs_weight, 0.0), mask, measure)
    checks["lhs_integrable"] = ok_l
    checks["rho_2q_integrable"] = ok_t
    grad_u = gradient(metric, differential(u))
    rhs = integrate(
        _masked(rhs_weight * norm_field(metric, grad_u).values ** 2, mask),
        mask, measure,
    )
    constant = (1.0 + q) ** 2 / (4.0 * cert.reversibility**2)
    if not ok_l:
        lhs = float("nan")
    return _assemble(
        CACCIOPPOLI, metric, mask, {"q": q}, lhs, rhs, constant, "lhs",
        checks, margins, {},
    )


def _require_flat_certificate(cert: MetricCertificate) -> None:
    if cert.curvature_bound is None or cert.curvature_bound > 0.0:
        raise CurvatureUnverified(
            "distance-based checks need a declared nonpositive curvature bound"
        )
    if cert.vanishing_mean_covariation is not True:
        raise CurvatureUnverified(
            "distance-based checks need declared vanishing mean covariation"
        )
    if not np.isfinite(cert.reversibility):
        raise InfiniteReversibility("distance-based checks require r_F < infinity")


def check_distance_hardy(
    metric: FinslerMetric,
    cert: MetricCertificate,
    alpha: float,
    u: ScalarField,
    mask: DomainMask,
    x0=None,
    measure: Measure = LEBESGUE,
) -> InequalityReport:
    """Distance-weighted Hardy on flat space: weights r^(alpha (2-n)).

    The alpha = 0 instance is the basic distance Hardy; it runs through the
    same code path and is labeled accordingly.
    """
    n = metric.dimension
    if n < 3:
        raise BadExponent("distance Hardy requires dimension n >= 3")
    if alpha >= 1.0:
        raise BadExponent(f"distance Hardy requires alpha < 1, got {alpha}")
    _require_flat_certificate(cert)
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    r = minkowski_distance_field(metric, x0, mask)
    rv = np.where(mask.include, r.values, 1.0)
    checks: dict[str, bool] = {
        "exponent_alpha_lt_1": True,
        "flat_certificate": True,
    }
    with np.errstate(divide="ignore", invalid="ignore"):
        w = rv ** (alpha * (2.0 - n))
        lhs_int = w * u.values**2 / rv**2
    ok_l, lhs = _finite_integral(np.where(mask.include, lhs_int, 0.0), mask, measure)
    checks["lhs_integrable"] = ok_l
    grad_u = gradient(metric, differential(u))
    ok_r, rhs = _finite_integral(
        np.where(mask.include, w * norm_field(metric, grad_u).values ** 2, 0.0),
        mask, measure,
    )
    checks["rhs_integrable"] = ok_r
    constant = (n - 2.0) ** 2 * (1.0 - alpha) ** 2 / (4.0 * cert.reversibility**2)
    theorem_id = DIST_HARDY_BASIC if alpha == 0.0 else DIST_HARDY
    if not ok_l:
        lhs = float("nan")
    if not ok_r:
        rhs = float("nan")
    return _assemble(
        theorem_id, metric, mask, {"alpha": alpha}, lhs, rhs, constant, "lhs",
        checks, {}, {},
    )


def check_log_hardy(
    metric: FinslerMetric,
    cert: MetricCertificate,
    alpha: float,
    u: ScalarField,
    mask: DomainMask,
    x0=None,
    measure: Measure = LEBESGUE,
    ring_band_cells: float = 10.0,
) -> InequalityReport:
    """Logarithmic Hardy with |log r|^alpha weights on r-level domains.

    Cells with |log r| below ring_band_cells * h are excluded (the r = 1
    singular ring); the exclusion is recorded in the report.
    """
    if metric.dimension < 2:
        raise BadExponent("log Hardy requires n >= 2")
    if alpha == 1.0:
        raise BadExponent("log Hardy requires alpha != 1")
    _require_flat_certificate(cert)
    desc = mask.descriptor
    if alpha < 1.0 and not desc.startswith("r_sublevel"):
        raise DomainMismatch(f"alpha < 1 needs an r_sublevel domain, got {desc}")
    if alpha > 1.0 and not desc.startswith("r_superlevel"):
        raise DomainMismatch(f"alpha > 1 needs an r_superlevel domain, got {desc}")

    x0 = np.zeros(metric.dimension) if x0 is None else np.asarray(x0, dtype=np.float64)
    r = minkowski_distance_field(metric, x0, mask)
    h = max(mask.grid.spacing)
    band = ring_band_cells * h
    with np.errstate(divide="ignore", invalid="ignore"):
        logr = np.log(np.maximum(r.values, 1e-300))
    keep = mask.include & (np.abs(logr) >= band)
    sub = DomainMask(mask.grid, keep, mask.descriptor + "+ring", dict(mask.meta))

    checks: dict[str, bool] = {"flat_certificate": True}
    rv = np.where(keep, r.values, np.e)  # placeholder off-mask, |log| = 1
    lr = np.where(keep, logr, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        w = np.abs(lr) ** alpha
        lhs_int = w * u.values**2 / (rv * lr) ** 2
    ok_l, lhs = _finite_integral(np.where(keep, lhs_int, 0.0), sub, measure)
    checks["lhs_integrable"] = ok_l
    grad_u = gradient(metric, differential(u))
    ok_r, rhs = _finite_integral(
        np.where(keep, w * norm_field(metric, grad_u).values ** 2, 0.0), sub, measure
    )
    checks["rhs_integrable"] = ok_r
    constant = (1.0 - alpha) ** 2 / (4.0 * cert.reversibility**2)
    extras = {"ring_band": band, "excluded_ring_cells": int((mask.include & ~keep).sum())}
    if not ok_l:
        lhs = float("nan")
    if not ok_r:
        rhs = float("nan")
    return _assemble(
        LOG_HARDY, metric, sub, {"alpha": alpha}, lhs, rhs, constant, "lhs",
        checks, {}, extras,
    )


def check_general_lemma(
    metric: FinslerMetric,
    pair: WeightPair,
    u: ScalarField,
    q: float,
    s: float,
    p: float,
    mask: DomainMask,
    battery: TestFunctionBattery,
    measure: Measure = LEBESGUE,
    cache: Optional[dict] = None,
) -> InequalityReport:
    """Hoelder-split generalization of the core lemma (exponents q, s, p)."""
    if s <= 0.0:
        raise BadExponent(f"s must be positive, got {s}")
    if p <= 1.0:
        raise BadExponent(f"p must exceed 1, got {p}")
    pp = p / (p - 1.0)
    checks: dict[str, bool] = {}
    margins: dict[str, float] = {}
    pm = _pair_margin_cached(metric, pair, battery, measure, cache)
    tol = _hypothesis_tol(mask)
    checks["f_X_le_minus_div_X"] = pm >= -tol
    margins["f_X_le_minus_div_X"] = pm

    FX = norm_field(metric, pair.X).values
    fv = pair.f_X.values
    uu = np.abs(u.values)
    grad_u = gradient(metric, differential(u))
    Fgu = norm_field(metric, grad_u).values

    with np.errstate(divide="ignore", invalid="ignore"):
        lhs_int = uu**s * FX**q
        t1_int = np.where(fv > 0, FX**2 / fv, np.where(FX == 0, 0.0, np.inf)) * Fgu**2
        t2_int = np.where(
            fv > 0, FX ** (q * pp) / fv ** (pp - 1.0),
            np.where(FX == 0, 0.0, np.inf),
        ) * uu ** ((p * s - 2.0) / (p - 1.0))
    ok_l, lhs = _finite_integral(np.where(mask.include, lhs_int, 0.0), mask, measure)
    ok_1, t1 = _finite_integral(np.where(mask.include, t1_int, 0.0), mask, measure)
    ok_2, t2 = _finite_integral(np.where(mask.include, t2_int, 0.0), mask, measure)
    checks["lhs_integrable"] = ok_l
    checks["gradient_factor_integrable"] = ok_1
    checks["holder_factor_integrable"] = ok_2
    rhs = (t1 ** (1.0 / p)) * (t2 ** (1.0 / pp)) if (ok_1 and ok_2) else float("nan")
    constant = 4.0 ** (1.0 / p)
    if not ok_l:
        lhs = float("nan")
    return _assemble(
        LEMMA_GENERAL, metric, mask, {"q": q, "s": s, "p": p}, lhs, rhs,
        constant, "rhs", checks, margins,
        {"gradient_factor": t1, "holder_factor": t2},
    )


def solve_gn_exponent(q: float, s: float, z: float) -> float:
    """Interpolation exponent r from 1/s = r/2 + (1-r)/z and 1/q = 1/2 + (1-r)/(r z)."""
    if q <= 0.0 or s <= 0.0 or z <= 0.0:
        raise ExponentInconsistent("q, s, z must be positive")
    r_q = 2.0 * q / (2.0 * q + z * (2.0 - q))
    if abs(z - 2.0) < 1e-12:
        if abs(1.0 / s - 0.5) > 1e-12:
            raise ExponentInconsistent("z = 2 forces s = 2")
        r = r_q
    else:
        r_s = (1.0 / s - 1.0 / z) / (0.5 - 1.0 / z)
        if abs(r_s - r_q) > 1e-9:
            raise ExponentInconsistent(
                f"exponent relations disagree: r_s={r_s}, r_q={r_q}"
            )
        r = r_q
    if not (0.0 < r < 1.0):
        raise ExponentInconsistent(f"need r in (0,1), got {r}")
    return r


def check_gn(
    metric: FinslerMetric,
    rho: ScalarField,
    u: ScalarField,
    q: float,
    s: float,
    z: float,
    mask: DomainMask,
    battery: TestFunctionBattery,
    measure: Measure = LEBESGUE,
    cache: Optional[dict] = None,
) -> InequalityReport:
    """Gagliardo-Nirenberg interpolation with the F*(D rho)/rho weight."""
    r_exp = solve_gn_exponent(q, s, z)
    checks: dict[str, bool] = {}
    margins: dict[str, float] = {}
    tol = _hypothesis_tol(mask)
    ok, m = _harmonicity(metric, rho, battery, tol, measure, cache, +1)
    checks["superharmonic"] = ok
    margins["superharmonic"] = m

    co = _co_of_rho(metric, rho, cache)
    rho_w = np.where(mask.include, rho.values, 1.0)
    uu = np.abs(u.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        lhs_int = uu**s * (co.values / rho_w) ** q
    ok_l, lhs_raw = _finite_integral(np.where(mask.include, lhs_int, 0.0), mask, measure)
    checks["lhs_integrable"] = ok_l
    grad_u = gradient(metric, differential(u))
    dirichlet = integrate(
        _masked(norm_field(metric, grad_u).values ** 2, mask), mask, measure
    )
    zmass = integrate(_masked(uu**z, mask), mask, measure)
    lhs = lhs_raw ** (1.0 / s) if ok_l else float("nan")
    rhs = dirichlet ** (r_exp / 2.0) * zmass ** ((1.0 - r_exp) / z)
    params = {"q": q, "s": s, "z": z, "r": r_exp}
    if (q, s) == (1.0, 2.0):
        params["label"] = "COROLLARY_1_2"
    return _assemble(
        GN, metric, mask, params, lhs, rhs, 2.0 ** (q / s), "rhs",
        checks, margins, {"dirichlet": dirichlet, "z_mass": zmass},
    )


def check_hpw(
    metric: FinslerMetric,
    rho: ScalarField,
    u: ScalarField,
    s: float,
    p: float,
    mask: DomainMask,
    battery: TestFunctionBattery,
    measure: Measure = LEBESGUE,
    cache: Optional[dict] = None,
) -> InequalityReport:
    """Uncertainty-principle bound with the rho / F*(D rho) moment weight."""
    if s <= 0.0:
        raise BadExponent(f"s must be positive, got {s}")
    if p <= 1.0:
        raise BadExponent(f"p must exceed 1, got {p}")
    pp = p / (p - 1.0)
    checks: dict[str, bool] = {}
    margins: dict[str, float] = {}
    tol = _hypothesis_tol(mask)
    ok, m = _harmonicity(metric, rho, battery, tol, measure, cache, +1)
    checks["superharmonic"] = ok
    margins["superharmonic"] = m

    co = _co_of_rho(metric, rho, cache)
    rho_w = np.where(mask.include, rho.values, 1.0)
    uu = np.abs(u.values)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = (rho_w / co.values) ** (2.0 * (pp - 1.0))
        moment_int = weight * uu ** ((p * s - 2.0) / (p - 1.0))
    lhs = integrate(_masked(uu**s, mask), mask, measure)
    grad_u = gradient(metric, differential(u))
    dirichlet = integrate(
        _masked(norm_field(metric, grad_u).values ** 2, mask), mask, measure
    )
    ok_m, moment = _finite_integral(np.where(mask.include, moment_int, 0.0), mask, measure)
    checks["moment_integrable"] = ok_m
    rhs = dirichlet ** (1.0 / p) * moment ** (1.0 / pp) if ok_m else float("nan")
    params = {"s": s, "p": p}
    if p == 2.0 and s == 2.0:
        params["label"] = "COROLLARY_1_3"
    return _assemble(
        HPW, metric, mask, params, lhs, rhs, 4.0 ** (1.0 / p), "rhs",
        checks, margins, {"dirichlet": dirichlet, "moment": moment},
    )
