"""Worst-case expectation bounds from Monte-Carlo evidence.

Converts raw per-class argmax counts or summed softmax scores into
``ExpectationBounds`` with one-sided coverage guarantees: Clopper-Pearson
(Beta-quantile) intervals for multinomial counts, a Hoeffding tail bound for
softmax means.  The Beta quantile is solved by safeguarded Newton/bisection
on a locally implemented regularized incomplete beta function, so coverage
does not depend on any external special-function library.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass

from .core import (ExpectationBounds, ExpectationMode, NumericError,
                   ValidationError, clamp_unit)


@dataclass(frozen=True, slots=True)
class RawCounts:
    """Per-class argmax counts from n i.i.d. noisy draws."""

    counts: tuple[int, ...]
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"n={self.n} must be >= 1")
        if len(self.counts) < 2:
            raise ValidationError("need at least two classes")
        if any(c < 0 for c in self.counts):
            raise ValidationError(f"negative count in {self.counts}")
        if sum(self.counts) != self.n:
            raise ValidationError(
                f"counts sum to {sum(self.counts)}, expected n={self.n}")


@dataclass(frozen=True, slots=True)
class SoftmaxSums:
    """Per-class summed softmax scores from n i.i.d. noisy draws."""

    sums: tuple[float, ...]
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValidationError(f"n={self.n} must be >= 1")
        if len(self.sums) < 2:
            raise ValidationError("need at least two classes")
        for s in self.sums:
            if not 0.0 <= s / self.n <= 1.0:
                raise ValidationError(f"sum {s!r} gives a mean outside [0, 1]")
        total = sum(self.sums) / self.n
        if abs(total - 1.0) > 1e-9:
            raise ValidationError(f"softmax means sum to {total!r}, expected 1")


class IntervalSide(enum.Enum):
    LOWER = "lower"
    UPPER = "upper"


def hoeffding_halfwidth(n: int, alpha: float) -> float:
    """Hoeffding deviation sqrt(ln(2/alpha) / (2n)) of a mean of n draws.

    With probability at least 1 - alpha the empirical mean of n i.i.d.
    [0, 1]-valued draws lies within this halfwidth of its expectation.
    """
    if n < 1:
        raise ValidationError(f"n={n} must be >= 1")
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha={alpha!r} outside (0, 1)")
    return math.sqrt(math.log(2.0 / alpha) / (2.0 * n))


_CF_MAX_ITER = 800
_CF_EPS = 1e-15
_CF_FPMIN = 1e-300


def _beta_cont_frac(a: float, b: float, x: float) -> float:
    """Continued fraction for the incomplete beta (modified Lentz)."""
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _CF_FPMIN:
        d = _CF_FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _CF_MAX_ITER + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _CF_FPMIN:
            d = _CF_FPMIN
        c = 1.0 + aa / c
        if abs(c) < _CF_FPMIN:
            c = _CF_FPMIN
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _CF_EPS:
            return h
    raise NumericError(
        f"incomplete beta continued fraction stalled (a={a}, b={b}, x={x})")


def regularized_incomplete_beta(a: float, b: float, x: float) -> float:
    """I_x(a, b), the regularized incomplete beta function."""
    if x <= 0.0:
        return 0.0
    if x >= 1.0:
        return 1.0
    ln_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(ln_front)
    # switch to the complement where the continued fraction converges fast
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _beta_cont_frac(a, b, x) / a
    return 1.0 - front * _beta_cont_frac(b, a, 1.0 - x) / b


_QUANTILE_REL_TOL = 1e-10
_QUANTILE_MAX_ITER = 300


@functools.lru_cache(maxsize=1 << 16)
def _beta_quantile(q: float, a: float, b: float) -> float:
    """Solve I_x(a, b) = q by bracketed Newton with bisection fallback."""
    if q <= 0.0:
        return 0.0
    if q >= 1.0:
        return 1.0
    ln_beta = math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)
    lo, hi = 0.0, 1.0
    x = a / (a + b)
    for _ in range(_QUANTILE_MAX_ITER):
        f = regularized_incomplete_beta(a, b, x) - q
        if f > 0.0:
            hi = x
        else:
            lo = x
        if hi - lo <= _QUANTILE_REL_TOL * max(lo, 1e-300):
            return 0.5 * (lo + hi)
        ln_pdf = (a - 1.0) * math.log(x) + (b - 1.0) * math.log1p(-x) - ln_beta
        nxt = 0.5 * (lo + hi)
        if ln_pdf > -700.0:
            step = f / math.exp(ln_pdf)
            cand = x - step
            if lo < cand < hi:
                nxt = cand
        if abs(nxt - x) <= _QUANTILE_REL_TOL * max(abs(nxt), 1e-300):
            return nxt
        x = nxt
    raise NumericError(
        f"beta quantile failed to converge: q={q}, a={a}, b={b}, "
        f"bracket=({lo}, {hi})")


def beta_interval(successes: int, n: int, alpha_side: float,
                  side: IntervalSide) -> float:
    """One-sided Clopper-Pearson bound on a binomial proportion.

    LOWER returns the alpha_side Beta(successes, n - successes + 1) quantile
    (0 when successes = 0); UPPER the 1 - alpha_side quantile of
    Beta(successes + 1, n - successes) (1 when successes = n).  Each side has
    guaranteed coverage at least 1 - alpha_side.
    """
    if not 0 <= successes <= n:
        raise ValidationError(f"successes={successes} outside [0, n={n}]")
    if not 0.0 < alpha_side < 1.0:
        raise ValidationError(f"alpha_side={alpha_side!r} outside (0, 1)")
    if side is IntervalSide.LOWER:
        if successes == 0:
            return 0.0
        return _beta_quantile(alpha_side, float(successes), float(n - successes + 1))
    if side is IntervalSide.UPPER:
        if successes == n:
            return 1.0
        return _beta_quantile(1.0 - alpha_side, float(successes + 1), float(n - successes))
    raise ValidationError(f"unknown side {side!r}")


def _top_two(values) -> tuple[int, int]:
    """Indices of the largest and second-largest entries, lowest index first."""
    top = max(range(len(values)), key=lambda k: (values[k], -k))
    runner = max((k for k in range(len(values)) if k != top),
                 key=lambda k: (values[k], -k))
    return top, runner


def bound_multinomial(raw: RawCounts, alpha: float) -> ExpectationBounds:
    """Bonferroni-joint Clopper-Pearson bounds on the top-2 class frequencies.

    The error budget alpha is split evenly across the lower bound on the top
    class and the upper bound on the runner-up, giving joint coverage at
    least 1 - alpha.  Both returned bounds are strictly inside (0, 1).
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha={alpha!r} outside (0, 1)")
    top, runner = _top_two(raw.counts)
    e0 = beta_interval(raw.counts[top], raw.n, alpha / 2.0, IntervalSide.LOWER)
    e1 = beta_interval(raw.counts[runner], raw.n, alpha / 2.0, IntervalSide.UPPER)
    return ExpectationBounds(e0=e0, e1=e1, mode=ExpectationMode.MULTINOMIAL,
                             n=raw.n, alpha=alpha, predicted_class=top)


def bound_softmax(sums: SoftmaxSums, alpha: float) -> ExpectationBounds:
    """Hoeffding bounds on the top-2 mean softmax scores.

    e0 is the top mean minus the halfwidth, e1 the runner-up mean plus it,
    both clamped into the open unit interval (the Hoeffding bound can exit
    [0, 1] for extreme means).  Ties for the top class break to the lowest
    class index.
    """
    if not 0.0 < alpha < 1.0:
        raise ValidationError(f"alpha={alpha!r} outside (0, 1)")
    top, runner = _top_two(sums.sums)
    hw = hoeffding_halfwidth(sums.n, alpha)
    e0 = clamp_unit(sums.sums[top] / sums.n - hw)
    e1 = clamp_unit(sums.sums[runner] / sums.n + hw)
    return ExpectationBounds(e0=e0, e1=e1, mode=ExpectationMode.SOFTMAX,
                             n=sums.n, alpha=alpha, predicted_class=top)
