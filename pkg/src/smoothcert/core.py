"""Shared domain types for smoothed-classifier certification.

Everything downstream (confidence bounds, certification mechanisms, sweeps,
dataset metrics) consumes only the two largest sorted class expectations of a
smoothed classifier, so these types deliberately carry no full K-class
vectors.  All types are immutable after construction and safe to share
between concurrent tasks.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

# Guard band keeping Gaussian quantiles and x**(1-w) powers finite when an
# analytic sweep touches the simplex edge.  Finite-sample confidence bounds
# never reach 0 or 1, so the clamp only matters for exact inputs.
GUARD = 1e-12


class ValidationError(ValueError):
    """An input violates a documented precondition or type invariant."""


class NumericError(ArithmeticError):
    """An iterative numeric routine failed to converge."""


class ExpectationMode(enum.Enum):
    """Which smoothed expectation the top-2 values were estimated from.

    SOFTMAX is the expected score vector under noise (soft expectation);
    MULTINOMIAL is the expectation of the one-hot argmax (hard expectation).
    """

    SOFTMAX = "softmax"
    MULTINOMIAL = "multinomial"


def _check_unit(name: str, value: float) -> None:
    # "not (0 <= v <= 1)" also rejects nan
    if not 0.0 <= value <= 1.0:
        raise ValidationError(f"{name}={value!r} outside [0, 1]")


@dataclass(frozen=True, slots=True)
class ExpectationBounds:
    """Worst-case bounds on the two largest sorted class expectations.

    ``e0`` lower-bounds the largest expectation and ``e1`` upper-bounds the
    runner-up.  The bounds are computed independently, so ``e0 + e1`` may
    exceed 1 and ``e0`` may fall below ``e1``; mechanisms return radius 0 in
    that case rather than rejecting the input.  ``n`` and ``alpha`` record
    the evidence behind the bounds; both are 0 for analytic (exact) inputs.
    """

    e0: float
    e1: float
    mode: ExpectationMode
    n: int = 0
    alpha: float = 0.0
    predicted_class: int = 0

    def __post_init__(self) -> None:
        _check_unit("e0", self.e0)
        _check_unit("e1", self.e1)
        if not isinstance(self.mode, ExpectationMode):
            raise ValidationError(f"mode={self.mode!r} is not an ExpectationMode")
        if self.n < 0:
            raise ValidationError(f"n={self.n} must be >= 0")
        if not 0.0 <= self.alpha < 1.0 or math.isnan(self.alpha):
            raise ValidationError(f"alpha={self.alpha!r} outside [0, 1)")
        if self.predicted_class < 0:
            raise ValidationError(f"predicted_class={self.predicted_class} must be >= 0")


@dataclass(frozen=True, slots=True)
class CertificationOutcome:
    """Per-mechanism certified l2 radii for one sample, plus their ensemble.

    ``radius_ensemble`` is the maximum over the mechanisms that were enabled
    when certifying; disabled mechanisms are recorded as 0.  ``abstained``
    means no enabled mechanism produced a positive radius.
    """

    predicted_class: int
    radius_cohen: float = 0.0
    radius_li: float = 0.0
    radius_lecuyer: float = 0.0
    radius_improved_dp: float = 0.0
    radius_ensemble: float = 0.0
    abstained: bool = True

    def __post_init__(self) -> None:
        radii = (self.radius_cohen, self.radius_li, self.radius_lecuyer,
                 self.radius_improved_dp, self.radius_ensemble)
        for name, r in zip(("radius_cohen", "radius_li", "radius_lecuyer",
                            "radius_improved_dp", "radius_ensemble"), radii):
            if not r >= 0.0:
                raise ValidationError(f"{name}={r!r} must be >= 0")
        if self.radius_ensemble != max(radii[:4]):
            raise ValidationError(
                "radius_ensemble must equal the maximum per-mechanism radius "
                f"(got {self.radius_ensemble!r}, max {max(radii[:4])!r})")
        if self.abstained and self.radius_ensemble != 0.0:
            raise ValidationError("abstained outcome must have all radii = 0")
        if not self.abstained and self.radius_ensemble == 0.0:
            raise ValidationError("non-abstained outcome must have a positive radius")


@dataclass(frozen=True, slots=True)
class SimplexPoint:
    """A point (e0, e1) in the sorted top-2 projection of the 3-simplex."""

    e0: float
    e1: float

    def __post_init__(self) -> None:
        _check_unit("e0", self.e0)
        _check_unit("e1", self.e1)
        if self.e1 > self.e0:
            raise ValidationError(f"e0={self.e0} < e1={self.e1} violates sortedness")
        if self.e0 + self.e1 > 1.0:
            raise ValidationError(f"e0 + e1 = {self.e0 + self.e1} exceeds 1")


@dataclass(frozen=True, slots=True)
class NoiseConfig:
    """Isotropic Gaussian smoothing noise plus the model's input sensitivity.

    ``delta_sens`` is the l2 Lipschitz-style sensitivity of the pre-noise
    transform; with identity pre-processing it is 1, which is the default.
    """

    sigma: float
    delta_sens: float = 1.0

    def __post_init__(self) -> None:
        if not self.sigma > 0.0:
            raise ValidationError(f"sigma={self.sigma!r} must be > 0")
        if not self.delta_sens > 0.0:
            raise ValidationError(f"delta_sens={self.delta_sens!r} must be > 0")


def clamp_unit(value: float) -> float:
    """Clamp a probability into [GUARD, 1 - GUARD]."""
    return min(max(value, GUARD), 1.0 - GUARD)


def make_bounds(e0: float, e1: float, mode: ExpectationMode) -> ExpectationBounds:
    """Build analytic (exact-input) bounds from raw top-2 expectations.

    Values are clamped into [GUARD, 1 - GUARD] so that downstream Gaussian
    quantiles and the x**(1-w) terms stay finite; idempotent on
    already-clamped inputs.  n = 0 and alpha = 0 mark the result as analytic.
    """
    _check_unit("e0", e0)
    _check_unit("e1", e1)
    return ExpectationBounds(e0=clamp_unit(e0), e1=clamp_unit(e1), mode=mode)
