"""Dataset-independent simplex sweeps and dataset-level certification metrics.

The sweep side evaluates mechanisms over the feasible lattice
{e0 >= e1 >= 0, e0 + e1 <= 1} of sorted top-2 expectations, producing radius
grids, difference/ratio maps and per-cell regions of superiority.  The
dataset side aggregates per-sample certification outcomes into certified
accuracy curves and summary statistics, including a Wilcoxon signed-rank
improvement test using the Pratt treatment of zero differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .confidence import RawCounts, SoftmaxSums
from .core import (CertificationOutcome, ExpectationBounds, ExpectationMode,
                   NoiseConfig, ValidationError, make_bounds)
from .ensemble import largest_mechanism, radius_of
from .mechanisms import (DEFAULT_OPTIMIZER, MECHANISM_ORDER, MechanismId,
                         OptimizerSettings, certify, std_normal_cdf)

ENSEMBLE_FIELD = "ensemble"
RadiusField = MechanismId | str  # a MechanismId or the literal "ensemble"


def _field_radius(outcome: CertificationOutcome, which: RadiusField) -> float:
    if which == ENSEMBLE_FIELD:
        return outcome.radius_ensemble
    if isinstance(which, MechanismId):
        return radius_of(outcome, which)
    raise ValidationError(f"unknown radius field {which!r}")


# ---------------------------------------------------------------------------
# simplex sweeps


@dataclass(frozen=True)
class SweepGrid:
    """Per-mechanism radius matrices over the feasible top-2 lattice.

    ``values[m][i, j]`` is the radius at (e0_axis[i], e1_axis[j]); cells
    outside the feasible region hold nan and are flagged in ``feasible``.
    Arrays are frozen read-only after construction.
    """

    resolution: int
    noise: NoiseConfig
    mode: ExpectationMode
    mechanisms: tuple[MechanismId, ...]
    e0_axis: np.ndarray
    e1_axis: np.ndarray
    feasible: np.ndarray
    values: dict[MechanismId, np.ndarray]

    def __post_init__(self) -> None:
        for arr in (self.e0_axis, self.e1_axis, self.feasible,
                    *self.values.values()):
            arr.setflags(write=False)


def sweep_simplex(mechanisms, noise: NoiseConfig, resolution: int,
                  mode: ExpectationMode,
                  opt: OptimizerSettings = DEFAULT_OPTIMIZER) -> SweepGrid:
    """Evaluate mechanisms at every feasible lattice point.

    The lattice is resolution points per axis over [0, 1] inclusive; inputs
    pass through ``make_bounds``, so edge values are guard-clamped exactly
    like any other analytic input.  Deterministic.
    """
    if resolution < 2:
        raise ValidationError(f"resolution={resolution} must be >= 2")
    mechanisms = tuple(sorted(set(mechanisms), key=MECHANISM_ORDER.index))
    if not mechanisms:
        raise ValidationError("no mechanisms selected")
    axis = np.linspace(0.0, 1.0, resolution)
    feasible = np.zeros((resolution, resolution), dtype=bool)
    values = {m: np.full((resolution, resolution), np.nan) for m in mechanisms}
    for i, e0 in enumerate(axis):
        for j, e1 in enumerate(axis):
            if e1 > e0 or e0 + e1 > 1.0:
                continue
            feasible[i, j] = True
            b = make_bounds(float(e0), float(e1), mode)
            for m in mechanisms:
                values[m][i, j] = certify(m, b, noise, opt)
    return SweepGrid(resolution=resolution, noise=noise, mode=mode,
                     mechanisms=mechanisms, e0_axis=axis, e1_axis=axis.copy(),
                     feasible=feasible, values=values)


def _require_mechanism(grid: SweepGrid, m: MechanismId) -> np.ndarray:
    if m not in grid.values:
        raise ValidationError(f"mechanism {m.value} not present in this sweep")
    return grid.values[m]


def diff_map(grid: SweepGrid, a: MechanismId, b: MechanismId) -> np.ndarray:
    """Elementwise radius difference a - b on feasible cells (nan elsewhere)."""
    return _require_mechanism(grid, a) - _require_mechanism(grid, b)


def ratio_map(grid: SweepGrid, numerator: MechanismId,
              denominators) -> np.ndarray:
    """Elementwise ratio numerator / max(denominators).

    Cells where the denominator is not strictly positive are masked (nan)
    rather than divided through.
    """
    num = _require_mechanism(grid, numerator)
    if isinstance(denominators, MechanismId):
        denominators = (denominators,)
    dens = [_require_mechanism(grid, d) for d in denominators]
    if not dens:
        raise ValidationError("no denominator mechanisms given")
    den = dens[0] if len(dens) == 1 else np.fmax.reduce(dens)
    out = np.full_like(num, np.nan)
    with np.errstate(invalid="ignore"):
        ok = grid.feasible & (den > 0.0)
    out[ok] = num[ok] / den[ok]
    return out


@dataclass(frozen=True)
class BoundarySegment:
    """One cell-edge piece of the boundary between two regions of superiority."""

    a: MechanismId
    b: MechanismId
    x1: float
    y1: float
    x2: float
    y2: float


@dataclass(frozen=True)
class RegionMap:
    """Per-cell argmax mechanism plus the polyline segments between regions.

    ``argmax[i, j]`` indexes MECHANISM_ORDER (-1 on infeasible cells).
    Segment coordinates are (e0, e1) pairs on the shared edge midline of
    adjacent cells whose winners differ.
    """

    mechanisms: tuple[MechanismId, ...]
    argmax: np.ndarray
    boundaries: tuple[BoundarySegment, ...]

    def __post_init__(self) -> None:
        self.argmax.setflags(write=False)

    def mechanism_at(self, i: int, j: int) -> MechanismId | None:
        k = int(self.argmax[i, j])
        return None if k < 0 else MECHANISM_ORDER[k]


def _cell_argmax(grid: SweepGrid, i: int, j: int) -> int:
    best, best_r = -1, -1.0
    for m in grid.mechanisms:
        r = float(grid.values[m][i, j])
        if r > best_r:
            best, best_r = MECHANISM_ORDER.index(m), r
    return best


def region_of_superiority(grid: SweepGrid) -> RegionMap:
    """Per-cell winning mechanism with the deterministic ensemble tie-break,
    plus the boundary segments used as figure overlays.  A single-mechanism
    grid trivially assigns that mechanism everywhere, with no boundaries."""
    res = grid.resolution
    arg = np.full((res, res), -1, dtype=np.int8)
    for i in range(res):
        for j in range(res):
            if grid.feasible[i, j]:
                arg[i, j] = _cell_argmax(grid, i, j)
    segments: list[BoundarySegment] = []
    e0, e1 = grid.e0_axis, grid.e1_axis
    h0 = e0[1] - e0[0]
    h1 = e1[1] - e1[0]
    for i in range(res):
        for j in range(res):
            if arg[i, j] < 0:
                continue
            # edge shared with the next cell along e0
            if i + 1 < res and arg[i + 1, j] >= 0 and arg[i + 1, j] != arg[i, j]:
                x = float(0.5 * (e0[i] + e0[i + 1]))
                segments.append(BoundarySegment(
                    a=MECHANISM_ORDER[min(arg[i, j], arg[i + 1, j])],
                    b=MECHANISM_ORDER[max(arg[i, j], arg[i + 1, j])],
                    x1=x, y1=float(e1[j] - 0.5 * h1),
                    x2=x, y2=float(e1[j] + 0.5 * h1)))
            # edge shared with the next cell along e1
            if j + 1 < res and arg[i, j + 1] >= 0 and arg[i, j + 1] != arg[i, j]:
                y = float(0.5 * (e1[j] + e1[j + 1]))
                segments.append(BoundarySegment(
                    a=MECHANISM_ORDER[min(arg[i, j], arg[i, j + 1])],
                    b=MECHANISM_ORDER[max(arg[i, j], arg[i, j + 1])],
                    x1=float(e0[i] - 0.5 * h0), y1=y,
                    x2=float(e0[i] + 0.5 * h0), y2=y))
    return RegionMap(mechanisms=grid.mechanisms, argmax=arg,
                     boundaries=tuple(segments))


def classify_sample_region(b: ExpectationBounds, noise: NoiseConfig,
                           mechanisms,
                           opt: OptimizerSettings = DEFAULT_OPTIMIZER) -> MechanismId:
    """The mechanism achieving the largest radius at this sample's (e0, e1);
    the per-sample counterpart of ``region_of_superiority``."""
    mechanisms = tuple(sorted(set(mechanisms), key=MECHANISM_ORDER.index))
    if not mechanisms:
        raise ValidationError("no mechanisms selected")
    best, best_r = None, -1.0
    for m in mechanisms:
        r = certify(m, b, noise, opt)
        if r > best_r:
            best, best_r = m, r
    return best


# ---------------------------------------------------------------------------
# per-sample records and dataset metrics


@dataclass(frozen=True, slots=True)
class SampleRecord:
    """One sample's evidence and certification result."""

    sample_id: str
    label: int | None = None
    counts: RawCounts | None = None
    sums: SoftmaxSums | None = None
    bounds: ExpectationBounds | None = None
    outcome: CertificationOutcome | None = None
    region: MechanismId | None = None

    def __post_init__(self) -> None:
        if self.outcome is not None and self.bounds is None:
            raise ValidationError("a record with an outcome must carry bounds")


def _require_outcomes(records) -> list[SampleRecord]:
    records = list(records)
    if not records:
        raise ValidationError("no records")
    missing = [r.sample_id for r in records if r.outcome is None]
    if missing:
        raise ValidationError(f"records without outcomes: {missing[:5]}")
    return records


def certified_accuracy_curve(records, radii, which: RadiusField):
    """Certified accuracy c(r) = mean(correct and radius > r) at each r.

    Every record must carry a label; abstentions (radius 0) never count.
    Returns a list of (r, c(r)) pairs in the order given.
    """
    records = _require_outcomes(records)
    unlabeled = [r.sample_id for r in records if r.label is None]
    if unlabeled:
        raise ValidationError(f"records without labels: {unlabeled[:5]}")
    n = len(records)
    out = []
    for r in radii:
        hits = sum(1 for rec in records
                   if rec.outcome.predicted_class == rec.label
                   and _field_radius(rec.outcome, which) > r)
        out.append((float(r), hits / n))
    return out


def curve_radii(records, points: int = 0):
    """Default evaluation thresholds: 0 plus every distinct certified radius
    (the exact breakpoints of the step function), or an even grid when a
    point budget is given."""
    records = _require_outcomes(records)
    values = sorted({_field_radius(r.outcome, ENSEMBLE_FIELD) for r in records})
    top = values[-1] if values else 0.0
    if points > 0:
        return list(np.linspace(0.0, top, points))
    return sorted({0.0, *values})


# ---------------------------------------------------------------------------
# Wilcoxon signed-rank test, Pratt zero procedure


@dataclass(frozen=True, slots=True)
class WilcoxonResult:
    """statistic is W+, the rank sum of positive differences with zeros
    ranked before being dropped (Pratt 1959)."""

    statistic: float
    p_value: float
    n_nonzero: int
    method: str


_EXACT_LIMIT = 25


def _rank_with_ties(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) with ties sharing their mean rank."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    sorted_vals = values[order]
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_p_two_sided(ranks2: np.ndarray, w2: int) -> float:
    """P-value by convolving the null distribution of W+ over sign flips.

    ranks2 are the (doubled, integer) ranks of the nonzero differences; the
    null assigns each an independent fair sign.
    """
    total = int(ranks2.sum())
    dist = np.zeros(total + 1)
    dist[0] = 1.0
    for r in ranks2:
        shifted = np.zeros_like(dist)
        shifted[r:] = dist[:total + 1 - r]
        dist = 0.5 * dist + 0.5 * shifted
    p_low = float(dist[:w2 + 1].sum())
    p_high = float(dist[w2:].sum())
    return min(1.0, 2.0 * min(p_low, p_high))


def wilcoxon_signed_rank(diffs, exact_limit: int = _EXACT_LIMIT) -> WilcoxonResult:
    """Two-sided Wilcoxon signed-rank test with the Pratt zero procedure.

    Zero differences are included when ranking absolute values and dropped
    afterwards, which keeps the test honest when many pairs are tied at
    zero.  The null distribution is enumerated exactly (convolution over
    sign flips, correct under ties) up to ``exact_limit`` nonzero pairs and
    approximated by a tie-corrected normal beyond.  All differences zero is
    degenerate: statistic 0, p = 1.
    """
    d = np.asarray(list(diffs), dtype=float)
    if d.size == 0:
        raise ValidationError("no differences given")
    if np.isnan(d).any():
        raise ValidationError("nan difference")
    ranks = _rank_with_ties(np.abs(d))
    nonzero = d != 0.0
    m = int(nonzero.sum())
    if m == 0:
        return WilcoxonResult(statistic=0.0, p_value=1.0, n_nonzero=0,
                              method="degenerate")
    w_plus = float(ranks[d > 0.0].sum())
    if m <= exact_limit:
        ranks2 = np.rint(2.0 * ranks[nonzero]).astype(np.int64)
        p = _exact_p_two_sided(ranks2, int(round(2.0 * w_plus)))
        return WilcoxonResult(statistic=w_plus, p_value=p, n_nonzero=m,
                              method="exact")
    n = d.size
    z0 = n - m
    mean = (n * (n + 1) - z0 * (z0 + 1)) / 4.0
    var = (n * (n + 1) * (2 * n + 1) - z0 * (z0 + 1) * (2 * z0 + 1)) / 24.0
    # tie correction over groups of equal |d| among the nonzero differences
    abs_nz = np.abs(d[nonzero])
    _, tie_counts = np.unique(abs_nz, return_counts=True)
    var -= float(np.sum(tie_counts ** 3 - tie_counts)) / 48.0
    if var <= 0.0:
        return WilcoxonResult(statistic=w_plus, p_value=1.0, n_nonzero=m,
                              method="normal")
    z = (w_plus - mean) / math.sqrt(var)
    p = min(1.0, 2.0 * (1.0 - std_normal_cdf(abs(z))))
    return WilcoxonResult(statistic=w_plus, p_value=p, n_nonzero=m,
                          method="normal")


# ---------------------------------------------------------------------------
# dataset summary


@dataclass(frozen=True, slots=True)
class MechanismStats:
    median_radius: float
    proportion_largest: float
    proportion_above_threshold: float


@dataclass(frozen=True, slots=True)
class ImprovementStats:
    """Ensemble-vs-baseline paired improvement statistics.

    Percentage columns exclude samples where the baseline radius is 0 (the
    improvement there is infinite; those samples are counted separately),
    as does the mean absolute improvement.  The median absolute improvement
    is over all pairs.
    """

    baseline: MechanismId
    wilcoxon_statistic: float
    wilcoxon_p: float
    proportion_improved: float
    median_improvement: float
    mean_improvement: float | None
    median_pct_improvement: float | None
    mean_pct_improvement: float | None
    infinite_pct_count: int


@dataclass(frozen=True, slots=True)
class DatasetSummary:
    num_samples: int
    threshold: float
    top1_accuracy: float | None
    abstention_rate: float
    mechanisms: dict[MechanismId, MechanismStats]
    ensemble_median_radius: float
    ensemble_proportion_above_threshold: float
    improvement: ImprovementStats

    def __post_init__(self) -> None:
        for name, value in (("abstention_rate", self.abstention_rate),
                            ("ensemble_proportion_above_threshold",
                             self.ensemble_proportion_above_threshold)):
            if not 0.0 <= value <= 1.0:
                raise ValidationError(f"{name}={value!r} outside [0, 1]")


def summarize(records, threshold: float = 0.05,
              baseline: MechanismId = MechanismId.COHEN) -> DatasetSummary:
    """Aggregate per-sample outcomes into summary metrics.

    proportion_largest attributes each sample to the mechanism with the
    largest radius using the deterministic ensemble tie-break (all-zero
    samples therefore fall to the first mechanism in declaration order);
    the proportions always sum to 1 across mechanisms.
    """
    records = _require_outcomes(records)
    n = len(records)
    outcomes = [r.outcome for r in records]
    labeled = [r for r in records if r.label is not None]
    top1 = (sum(1 for r in labeled if r.outcome.predicted_class == r.label)
            / len(labeled)) if labeled else None
    abstention = sum(1 for o in outcomes if o.abstained) / n

    winners = [largest_mechanism(o) for o in outcomes]
    stats: dict[MechanismId, MechanismStats] = {}
    for m in MECHANISM_ORDER:
        radii = [radius_of(o, m) for o in outcomes]
        stats[m] = MechanismStats(
            median_radius=float(np.median(radii)),
            proportion_largest=winners.count(m) / n,
            proportion_above_threshold=sum(1 for r in radii if r > threshold) / n,
        )

    ens = [o.radius_ensemble for o in outcomes]
    base = [radius_of(o, baseline) for o in outcomes]
    diffs = [e - b for e, b in zip(ens, base)]
    wil = wilcoxon_signed_rank(diffs)
    positive_base = [(d, b) for d, b in zip(diffs, base) if b > 0.0]
    pct = [100.0 * d / b for d, b in positive_base]
    improvement = ImprovementStats(
        baseline=baseline,
        wilcoxon_statistic=wil.statistic,
        wilcoxon_p=wil.p_value,
        proportion_improved=sum(1 for d in diffs if d > 0.0) / n,
        median_improvement=float(np.median(diffs)),
        mean_improvement=(float(np.mean([d for d, _ in positive_base]))
                          if positive_base else None),
        median_pct_improvement=float(np.median(pct)) if pct else None,
        mean_pct_improvement=float(np.mean(pct)) if pct else None,
        infinite_pct_count=sum(1 for e, b in zip(ens, base)
                               if b == 0.0 and e > 0.0),
    )
    return DatasetSummary(
        num_samples=n,
        threshold=threshold,
        top1_accuracy=top1,
        abstention_rate=abstention,
        mechanisms=stats,
        ensemble_median_radius=float(np.median(ens)),
        ensemble_proportion_above_threshold=sum(1 for r in ens if r > threshold) / n,
        improvement=improvement,
    )
