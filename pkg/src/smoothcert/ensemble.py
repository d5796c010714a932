"""Ensemble certification: take the best radius across several mechanisms.

All enabled mechanisms are evaluated on the same expectation bounds, so the
Monte-Carlo evidence (and its confidence adjustment) is shared; each
mechanism is a deterministic function of the worst-case bounds, so no
multiplicity correction is needed and the maximum dominates every
constituent by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (CertificationOutcome, ExpectationBounds, ExpectationMode,
                   NoiseConfig, ValidationError)
from .mechanisms import (DEFAULT_OPTIMIZER, MECHANISM_ORDER, MechanismId,
                         OptimizerSettings, applicable_mechanisms, certify)


@dataclass(frozen=True, slots=True)
class EnsembleConfig:
    """Which mechanisms participate, for bounds of which expectation mode.

    Softmax bounds can only be certified by the DP mechanisms (LECUYER and
    IMPROVED_DP); multinomial bounds admit any subset of the four.
    """

    enabled: frozenset[MechanismId]
    mode: ExpectationMode

    def __post_init__(self) -> None:
        if not self.enabled:
            raise ValidationError("ensemble needs at least one mechanism")
        allowed = set(applicable_mechanisms(self.mode))
        bad = set(self.enabled) - allowed
        if bad:
            names = ", ".join(sorted(m.value for m in bad))
            raise ValidationError(
                f"mechanisms not applicable to {self.mode.value} bounds: {names}")


def default_ensemble(mode: ExpectationMode) -> EnsembleConfig:
    """The standard certification sets: Cohen/Li/improved-DP for multinomial
    bounds, Lecuyer/improved-DP for softmax bounds."""
    if mode is ExpectationMode.SOFTMAX:
        enabled = frozenset({MechanismId.LECUYER, MechanismId.IMPROVED_DP})
    else:
        enabled = frozenset({MechanismId.COHEN, MechanismId.LI,
                             MechanismId.IMPROVED_DP})
    return EnsembleConfig(enabled=enabled, mode=mode)


def full_ensemble(mode: ExpectationMode) -> EnsembleConfig:
    """Every mechanism applicable to the mode."""
    return EnsembleConfig(enabled=frozenset(applicable_mechanisms(mode)),
                          mode=mode)


def certify_ensemble(b: ExpectationBounds, noise: NoiseConfig,
                     cfg: EnsembleConfig,
                     opt: OptimizerSettings = DEFAULT_OPTIMIZER) -> CertificationOutcome:
    """Evaluate every enabled mechanism on the same bounds and keep the max.

    Per-mechanism radii are retained in the outcome (disabled mechanisms are
    recorded as 0) so downstream analytics can attribute the winner.
    """
    if cfg.mode is not b.mode:
        raise ValidationError(
            f"bounds mode {b.mode.value} does not match ensemble mode {cfg.mode.value}")
    radii = {m: 0.0 for m in MECHANISM_ORDER}
    for m in MECHANISM_ORDER:
        if m in cfg.enabled:
            radii[m] = certify(m, b, noise, opt)
    ensemble = max(radii[m] for m in cfg.enabled)
    return CertificationOutcome(
        predicted_class=b.predicted_class,
        radius_cohen=radii[MechanismId.COHEN],
        radius_li=radii[MechanismId.LI],
        radius_lecuyer=radii[MechanismId.LECUYER],
        radius_improved_dp=radii[MechanismId.IMPROVED_DP],
        radius_ensemble=ensemble,
        abstained=ensemble == 0.0,
    )


def radius_of(outcome: CertificationOutcome, mechanism: MechanismId) -> float:
    """Read one mechanism's radius out of an outcome."""
    return {
        MechanismId.COHEN: outcome.radius_cohen,
        MechanismId.LI: outcome.radius_li,
        MechanismId.LECUYER: outcome.radius_lecuyer,
        MechanismId.IMPROVED_DP: outcome.radius_improved_dp,
    }[mechanism]


def largest_mechanism(outcome: CertificationOutcome,
                      enabled=MECHANISM_ORDER) -> MechanismId:
    """The mechanism with the largest radius; ties break by declaration
    order (COHEN < LI < LECUYER < IMPROVED_DP) so the statistic is
    deterministic."""
    best = None
    best_r = -1.0
    for m in MECHANISM_ORDER:
        if m not in enabled:
            continue
        r = radius_of(outcome, m)
        if r > best_r:
            best, best_r = m, r
    if best is None:
        raise ValidationError("enabled set selects no mechanisms")
    return best
