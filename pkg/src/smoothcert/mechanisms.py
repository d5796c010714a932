"""Certified l2 radii from top-2 expectation bounds.

Four certification mechanisms share the same input (ExpectationBounds plus
NoiseConfig) and differ only in how they parameterize the worst case:

* ``certify_cohen``: sigma * Phi^-1(e0), gated on e0 > 0.5 (Cohen et al. 2019).
* ``certify_li``: Renyi-divergence bound, supremum over divergence orders
  w > 1 (Li et al. 2019).
* ``certify_lecuyer``: differential-privacy bound with the classical
  Gaussian-mechanism calibration folded in, maximized over eps in (0, 1]
  (Lecuyer et al. 2019).
* ``certify_improved_dp``: differential privacy again, but using the exact
  Gaussian-mechanism (eps, delta) trade-off (Balle & Wang 2018) recast as a
  constrained maximization of the radius over eps and delta.

Every radius scales linearly in sigma and inversely in the sensitivity; the
optimizers work in scale-free variables so this holds exactly in floating
point.  Failing to find the global optimum of any of the inner maximizations
only loosens (never invalidates) a certificate, since every evaluated point
is itself a valid lower bound.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc as _erfc_arr

from .core import (ExpectationBounds, ExpectationMode, GUARD, NoiseConfig,
                   NumericError, ValidationError, clamp_unit)

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_LN2 = math.log(2.0)
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0  # golden ratio section
_EPS_OVERFLOW = 700.0  # exp() overflows just above this


class MechanismId(enum.Enum):
    """The four mechanisms; declaration order is the deterministic tie-break."""

    COHEN = "cohen"
    LI = "li"
    LECUYER = "lecuyer"
    IMPROVED_DP = "improved_dp"


MECHANISM_ORDER: tuple[MechanismId, ...] = tuple(MechanismId)


@dataclass(frozen=True, slots=True)
class OptimizerSettings:
    """Knobs for the scalar maximizations inside the mechanisms.

    The Li supremum uses ``grid_points`` values of w with w - 1 log-spaced in
    [1e-6, omega_max - 1]; the DP mechanisms use ``grid_points`` log-spaced
    eps values in [eps_min, eps_max] with eps_max capped at ``eps_cap``.  The
    best grid cell is then refined with ``refine_iters`` golden-section
    steps.  ``bisect_tol`` is the relative tolerance of the radius bisection
    inside the improved DP mechanism.
    """

    grid_points: int = 200
    refine_iters: int = 60
    omega_max: float = 500.0
    eps_min: float = 1e-4
    eps_cap: float = 50.0
    bisect_tol: float = 1e-9

    def __post_init__(self) -> None:
        for name in ("grid_points", "refine_iters", "omega_max", "eps_min",
                     "eps_cap", "bisect_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.grid_points < 2:
            raise ValidationError("grid_points must be >= 2")
        if self.omega_max <= 1.0:
            raise ValidationError("omega_max must exceed 1")
        if self.eps_cap > _EPS_OVERFLOW / 2.0:
            raise ValidationError(f"eps_cap must be <= {_EPS_OVERFLOW / 2.0}")
        if not self.bisect_tol < 1e-3:
            raise ValidationError("bisect_tol must be < 1e-3")


DEFAULT_OPTIMIZER = OptimizerSettings()


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF via erfc; absolute error well below 1e-12."""
    return 0.5 * math.erfc(-x * _INV_SQRT2)


# Acklam's rational approximation to the normal quantile (abs err < 1.2e-9),
# used as the seed for two Halley refinements against the erfc-based CDF.
_ACK_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
          1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_ACK_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
          6.680131188771972e+01, -1.328068155288572e+01)
_ACK_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
          -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_ACK_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
          3.754408661907416e+00)
_ACK_P_LOW = 0.02425


def _acklam(p: float) -> float:
    a, b, c, d = _ACK_A, _ACK_B, _ACK_C, _ACK_D
    if p < _ACK_P_LOW:
        q = math.sqrt(-2.0 * math.log(p))
        return ((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
                / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    if p > 1.0 - _ACK_P_LOW:
        q = math.sqrt(-2.0 * math.log(1.0 - p))
        return -((((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5])
                 / ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0))
    q = p - 0.5
    r = q * q
    return ((((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q
            / (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0))


def std_normal_quantile(p: float) -> float:
    """Inverse standard normal CDF, accurate to a few ulp after refinement.

    Reduced to the lower tail by symmetry: there Phi keeps full relative
    precision, so the Halley residual Phi(x) - p does not cancel.  The
    reduction 1 - p is exact for p >= 0.5.
    """
    if not 0.0 < p < 1.0:
        raise ValidationError(f"p={p!r} outside (0, 1)")
    if p > 0.5:
        return -_lower_quantile(1.0 - p)
    return _lower_quantile(p)


def _lower_quantile(p: float) -> float:
    x = _acklam(p)
    for _ in range(2):
        err = std_normal_cdf(x) - p
        pdf = math.exp(-0.5 * x * x) * _INV_SQRT_2PI
        if pdf <= 0.0:
            break
        u = err / pdf
        x -= u / (1.0 + 0.5 * x * u)  # Halley step
    return x


def _phi_arr(x: np.ndarray) -> np.ndarray:
    """Vectorized standard normal CDF (same erfc formulation)."""
    return 0.5 * _erfc_arr(-x * _INV_SQRT2)


def _golden_max(f, lo: float, hi: float, iters: int) -> float:
    """Golden-section maximization; returns the best value seen.

    Assumes f is unimodal on [lo, hi]; if it is not, the result is still a
    valid lower bound on the supremum because only evaluated points are
    returned.
    """
    c = hi - (hi - lo) * _INVPHI
    d = lo + (hi - lo) * _INVPHI
    fc, fd = f(c), f(d)
    best = max(fc, fd)
    for _ in range(iters):
        if fc >= fd:
            hi, d, fd = d, c, fc
            c = hi - (hi - lo) * _INVPHI
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + (hi - lo) * _INVPHI
            fd = f(d)
        best = max(best, fc, fd)
    return best


def _grid_then_golden(scalar_f, grid: np.ndarray, grid_values: np.ndarray,
                      iters: int) -> float:
    """Refine the best grid cell of a precomputed objective sweep."""
    i = int(np.argmax(grid_values))
    best = float(grid_values[i])
    lo = float(grid[max(i - 1, 0)])
    hi = float(grid[min(i + 1, len(grid) - 1)])
    if hi > lo:
        best = max(best, _golden_max(scalar_f, lo, hi, iters))
    return best


def _clamped(b: ExpectationBounds) -> tuple[float, float]:
    return clamp_unit(b.e0), clamp_unit(b.e1)


def _require_multinomial(b: ExpectationBounds, op: str) -> None:
    if b.mode is not ExpectationMode.MULTINOMIAL:
        raise ValidationError(f"{op} requires multinomial-mode bounds, got {b.mode}")


def certify_cohen(b: ExpectationBounds, noise: NoiseConfig) -> float:
    """Gaussian-quantile radius sigma * Phi^-1(e0); abstains for e0 <= 0.5."""
    _require_multinomial(b, "certify_cohen")
    e0, _ = _clamped(b)
    if e0 <= 0.5:
        return 0.0
    return noise.sigma * std_normal_quantile(e0)


def _li_objective(e0: float, e1: float, omega: float) -> float:
    # sqrt(-(2/w) log M(w)) with the power mean evaluated in log space so
    # e1**(1-w) cannot overflow for small e1 and large w
    p = 1.0 - omega
    a = p * math.log(e0)
    bb = p * math.log(e1)
    hi, lo = (a, bb) if a >= bb else (bb, a)
    power_mean = math.exp((hi + math.log1p(math.exp(lo - hi)) - _LN2) / p)
    m = 1.0 - e0 - e1 + 2.0 * power_mean
    if not 0.0 < m < 1.0:
        return 0.0
    return math.sqrt(-2.0 / omega * math.log(m))


def _li_objective_arr(e0: float, e1: float, omegas: np.ndarray) -> np.ndarray:
    p = 1.0 - omegas
    a = p * math.log(e0)
    bb = p * math.log(e1)
    power_mean = np.exp((np.logaddexp(a, bb) - _LN2) / p)
    m = 1.0 - e0 - e1 + 2.0 * power_mean
    ok = (m > 0.0) & (m < 1.0)
    out = np.zeros_like(omegas)
    out[ok] = np.sqrt(-2.0 / omegas[ok] * np.log(m[ok]))
    return out


def certify_li(b: ExpectationBounds, noise: NoiseConfig,
               opt: OptimizerSettings = DEFAULT_OPTIMIZER) -> float:
    """Renyi-divergence radius: sup over w > 1 of sigma * sqrt(-(2/w) ln M(w))

    with M(w) = 1 - e0 - e1 + 2 * ((e0^(1-w) + e1^(1-w)) / 2)^(1/(1-w)).
    Orders where M falls outside (0, 1) contribute nothing.  Returns 0 when
    e0 <= e1.
    """
    _require_multinomial(b, "certify_li")
    e0, e1 = _clamped(b)
    if e0 <= e1:
        return 0.0
    omegas = 1.0 + np.geomspace(1e-6, opt.omega_max - 1.0, opt.grid_points)
    values = _li_objective_arr(e0, e1, omegas)
    best = _grid_then_golden(lambda w: _li_objective(e0, e1, w),
                             omegas, values, opt.refine_iters)
    return noise.sigma * best


def _lecuyer_objective(e0: float, e1: float, eps: float) -> float:
    gap = e0 - math.exp(2.0 * eps) * e1
    if gap <= 0.0:
        return 0.0
    return eps / math.sqrt(2.0 * math.log(1.25 * (1.0 + math.exp(eps)) / gap))


def certify_lecuyer(b: ExpectationBounds, noise: NoiseConfig,
                    opt: OptimizerSettings = DEFAULT_OPTIMIZER) -> float:
    """Classical DP radius: max over eps in (0, 1] of

    sigma * eps / (sens * sqrt(2 ln(1.25 (1 + e^eps) / (e0 - e^(2 eps) e1)))),
    evaluated only where e0 - e^(2 eps) e1 > 0.  Applies to either expectation
    mode.  Returns 0 when e0 <= e1.
    """
    e0, e1 = _clamped(b)
    if e0 <= e1:
        return 0.0
    eps_hi = min(1.0, 0.5 * math.log(e0 / e1))
    eps_lo = min(opt.eps_min, eps_hi / 2.0)
    eps = np.geomspace(eps_lo, eps_hi, opt.grid_points)
    gap = e0 - np.exp(2.0 * eps) * e1
    ok = gap > 0.0
    values = np.zeros_like(eps)
    values[ok] = eps[ok] / np.sqrt(
        2.0 * np.log(1.25 * (1.0 + np.exp(eps[ok])) / gap[ok]))
    best = _grid_then_golden(lambda e: _lecuyer_objective(e0, e1, e),
                             eps, values, opt.refine_iters)
    return noise.sigma * best / noise.delta_sens


def dp_delta_required(L: float, eps: float, noise: NoiseConfig) -> float:
    """Smallest delta for which the Gaussian mechanism is (eps, delta)-DP at
    distance L:

        Phi(s L / (2 sigma) - eps sigma / (s L))
            - e^eps * Phi(-s L / (2 sigma) - eps sigma / (s L))

    with s the sensitivity.  Non-decreasing in L; tends to 0 as L -> 0+.
    """
    if not L > 0.0:
        raise ValidationError(f"L={L!r} must be > 0")
    if not 0.0 <= eps <= _EPS_OVERFLOW:
        raise ValidationError(f"eps={eps!r} outside [0, {_EPS_OVERFLOW}]")
    u = noise.delta_sens * L / noise.sigma
    return _delta_required_u(u, eps)


def _delta_required_u(u: float, eps: float) -> float:
    # scale-free form in u = sens * L / sigma
    half = 0.5 * u
    ratio = eps / u
    return (std_normal_cdf(half - ratio)
            - math.exp(eps) * std_normal_cdf(-half - ratio))


def _delta_required_u_arr(u: np.ndarray, eps: np.ndarray) -> np.ndarray:
    half = 0.5 * u
    ratio = eps / u
    return _phi_arr(half - ratio) - np.exp(eps) * _phi_arr(-half - ratio)


def dp_delta_budget(b: ExpectationBounds, eps: float) -> float:
    """Largest delta compatible with class separation at privacy level eps:

        (e0 - e1 e^(2 eps)) / (1 + e^eps).

    May be <= 0, meaning eps is infeasible for these bounds.
    """
    if not 0.0 <= eps <= _EPS_OVERFLOW / 2.0:
        raise ValidationError(f"eps={eps!r} outside [0, {_EPS_OVERFLOW / 2.0}]")
    return (b.e0 - b.e1 * math.exp(2.0 * eps)) / (1.0 + math.exp(eps))


_BRACKET_MAX_DOUBLINGS = 80
_BISECT_MAX_ITER = 400


def _u_star(e0: float, e1: float, eps: float, tol: float) -> float:
    """Largest u with delta_required(u, eps) <= the separation budget.

    delta_required is strictly increasing in u with range (0, 1), so an
    exponential bracket expansion followed by bisection finds the crossing.
    The lower bracket end is returned, which satisfies the constraint by
    construction even if monotonicity degraded numerically.
    """
    budget = (e0 - e1 * math.exp(2.0 * eps)) / (1.0 + math.exp(eps))
    if budget <= 0.0:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(_BRACKET_MAX_DOUBLINGS):
        if _delta_required_u(hi, eps) >= budget:
            break
        lo, hi = hi, 2.0 * hi
    else:
        raise NumericError(
            f"failed to bracket the DP radius (eps={eps}, budget={budget})")
    for _ in range(_BISECT_MAX_ITER):
        if hi - lo <= tol * max(lo, 1e-300):
            break
        mid = 0.5 * (lo + hi)
        if _delta_required_u(mid, eps) <= budget:
            lo = mid
        else:
            hi = mid
    return lo


def _u_star_arr(e0: float, e1: float, eps: np.ndarray, tol: float) -> np.ndarray:
    """Vectorized _u_star over an eps grid (lockstep bracket + bisection)."""
    budget = (e0 - e1 * np.exp(2.0 * eps)) / (1.0 + np.exp(eps))
    feasible = budget > 0.0
    lo = np.zeros_like(eps)
    hi = np.ones_like(eps)
    for _ in range(_BRACKET_MAX_DOUBLINGS):
        need = feasible & (_delta_required_u_arr(hi, eps) < budget)
        if not need.any():
            break
        lo[need] = hi[need]
        hi[need] *= 2.0
    else:
        raise NumericError("failed to bracket the DP radius on the eps grid")
    for _ in range(_BISECT_MAX_ITER):
        open_ = feasible & (hi - lo > tol * np.maximum(lo, 1e-300))
        if not open_.any():
            break
        mid = 0.5 * (lo + hi)
        below = _delta_required_u_arr(mid, eps) <= budget
        adv = open_ & below
        shrink = open_ & ~below
        lo[adv] = mid[adv]
        hi[shrink] = mid[shrink]
    return np.where(feasible, lo, 0.0)


def certify_improved_dp(b: ExpectationBounds, noise: NoiseConfig,
                        opt: OptimizerSettings = DEFAULT_OPTIMIZER) -> float:
    """Tight Gaussian-mechanism DP radius.

    For each eps the class-separation constraint caps delta at
    ``dp_delta_budget``; the radius L(eps) is then the largest L with
    ``dp_delta_required(L, eps) <= budget``, found by bracketed bisection in
    the scale-free variable u = sens * L / sigma.  The outer maximum over
    eps in [eps_min, eps_max] (eps_max = min(eps_cap, ln(e0/e1)/2)) uses a
    log-spaced grid plus golden-section refinement.  Applies to either
    expectation mode; returns 0 when e0 <= e1.
    """
    e0, e1 = _clamped(b)
    if e0 <= e1:
        return 0.0
    eps_max = min(opt.eps_cap, 0.5 * math.log(e0 / e1))
    eps_lo = min(opt.eps_min, eps_max / 2.0)
    eps = np.geomspace(eps_lo, eps_max, opt.grid_points)
    values = _u_star_arr(e0, e1, eps, opt.bisect_tol)
    best = _grid_then_golden(lambda e: _u_star(e0, e1, e, opt.bisect_tol),
                             eps, values, opt.refine_iters)
    return best * noise.sigma / noise.delta_sens


_CERTIFY = {
    MechanismId.COHEN: lambda b, noise, opt: certify_cohen(b, noise),
    MechanismId.LI: certify_li,
    MechanismId.LECUYER: certify_lecuyer,
    MechanismId.IMPROVED_DP: certify_improved_dp,
}


def certify(mechanism: MechanismId, b: ExpectationBounds, noise: NoiseConfig,
            opt: OptimizerSettings = DEFAULT_OPTIMIZER) -> float:
    """Dispatch to one mechanism by id."""
    return _CERTIFY[mechanism](b, noise, opt)


def applicable_mechanisms(mode: ExpectationMode) -> tuple[MechanismId, ...]:
    """Mechanisms that can certify bounds of the given expectation mode."""
    if mode is ExpectationMode.SOFTMAX:
        return (MechanismId.LECUYER, MechanismId.IMPROVED_DP)
    return MECHANISM_ORDER
