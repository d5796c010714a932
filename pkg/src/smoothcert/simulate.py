"""Monte-Carlo randomized smoothing against analytic synthetic classifiers.

The certification pipeline only ever sees class expectations, so desk-scale
validation replaces a trained network with classifiers whose smoothed output
is known in closed form:

* ``FixedDistribution``: the noisy argmax is categorical with fixed
  probabilities (noise is marginalized away analytically).
* ``LinearTwoClass``: a halfspace classifier sign(w.x + b); under
  N(x, sigma^2 I) the smoothed top-class probability is exactly
  Phi((w.x + b) / (sigma ||w||)), the case where the Gaussian-quantile
  certificate is tight.

Randomness is reproducible and batch-parallel safe: each sample index gets
its own counter-based Philox stream derived from
``SeedSequence(entropy=seed, spawn_key=(stream,))``, so results do not
depend on evaluation order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .confidence import (IntervalSide, RawCounts, SoftmaxSums, beta_interval,
                         bound_multinomial, bound_softmax)
from .core import (CertificationOutcome, ExpectationBounds, ExpectationMode,
                   NoiseConfig, ValidationError, clamp_unit)
from .ensemble import EnsembleConfig, certify_ensemble
from .mechanisms import (DEFAULT_OPTIMIZER, OptimizerSettings,
                         std_normal_cdf, std_normal_quantile)

_CHUNK = 1 << 20  # draws per block when sampling perturbations


@dataclass(frozen=True, slots=True)
class FixedDistribution:
    """Classifier whose noisy argmax distribution is a fixed categorical p."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.probs) < 2:
            raise ValidationError("need at least two classes")
        if any(p < 0.0 for p in self.probs):
            raise ValidationError(f"negative probability in {self.probs}")
        if abs(sum(self.probs) - 1.0) > 1e-9:
            raise ValidationError(f"probabilities sum to {sum(self.probs)!r}")

    @property
    def num_classes(self) -> int:
        return len(self.probs)


@dataclass(frozen=True, slots=True)
class LinearTwoClass:
    """Halfspace classifier: class 0 iff w.x + b > 0."""

    weights: tuple[float, ...]
    offset: float = 0.0

    def __post_init__(self) -> None:
        if not self.weights or all(w == 0.0 for w in self.weights):
            raise ValidationError("weights must be nonzero")

    @property
    def num_classes(self) -> int:
        return 2


SyntheticClassifier = FixedDistribution | LinearTwoClass


@dataclass(frozen=True, slots=True)
class SimulationRun:
    """Sampling plan for one certification: seed, draw counts, noise, alpha.

    ``n0`` is only used by the two-stage binomial procedure
    (``binomial_certify_original``); the one-stage procedures reuse the same
    n draws for class selection and certification.
    """

    seed: int
    n: int
    n0: int = 100
    sigma: float = 1.0
    alpha: float = 0.001

    def __post_init__(self) -> None:
        if not 0 <= self.seed < 2 ** 64:
            raise ValidationError(f"seed={self.seed} outside [0, 2^64)")
        if self.n < 1:
            raise ValidationError(f"n={self.n} must be >= 1")
        if self.n0 < 1:
            raise ValidationError(f"n0={self.n0} must be >= 1")
        if not self.sigma > 0.0:
            raise ValidationError(f"sigma={self.sigma!r} must be > 0")
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"alpha={self.alpha!r} outside (0, 1)")

    def noise(self) -> NoiseConfig:
        return NoiseConfig(sigma=self.sigma)


def _stream(seed: int, stream: int) -> np.random.Generator:
    """Counter-based generator for one sample's draws.

    The derivation SeedSequence(entropy=seed, spawn_key=(stream,)) -> Philox
    is stable across runs and processes; distinct stream indices give
    statistically independent streams.
    """
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(stream,))))


def _as_point(c: SyntheticClassifier, x) -> np.ndarray:
    if isinstance(c, FixedDistribution):
        return np.zeros(1) if x is None else np.asarray(x, dtype=float)
    w = np.asarray(c.weights, dtype=float)
    if x is None:
        return np.zeros(w.size)
    x = np.asarray(x, dtype=float)
    if x.shape != w.shape:
        raise ValidationError(f"x has shape {x.shape}, weights {w.shape}")
    return x


def smoothed_truth(c: SyntheticClassifier, x, sigma: float) -> tuple[float, ...]:
    """Exact smoothed argmax probabilities (the quantity Monte Carlo estimates)."""
    if not sigma > 0.0:
        raise ValidationError(f"sigma={sigma!r} must be > 0")
    if isinstance(c, FixedDistribution):
        return c.probs
    x = _as_point(c, x)
    w = np.asarray(c.weights, dtype=float)
    margin = (float(w @ x) + c.offset) / (sigma * float(np.linalg.norm(w)))
    p0 = std_normal_cdf(margin)
    return (p0, 1.0 - p0)


def _count_halfspace(c: LinearTwoClass, x: np.ndarray, n: int, sigma: float,
                     gen: np.random.Generator) -> int:
    """Number of class-0 hits among n actual Gaussian perturbations."""
    w = np.asarray(c.weights, dtype=float)
    base = float(w @ x) + c.offset
    hits = 0
    remaining = n
    while remaining > 0:
        block = min(remaining, max(1, _CHUNK // w.size))
        z = gen.standard_normal((block, w.size))
        hits += int(np.count_nonzero(base + sigma * (z @ w) > 0.0))
        remaining -= block
    return hits


def _draw_counts(c: SyntheticClassifier, x: np.ndarray, n: int, sigma: float,
                 gen: np.random.Generator) -> RawCounts:
    if isinstance(c, FixedDistribution):
        counts = gen.multinomial(n, np.asarray(c.probs, dtype=float))
        return RawCounts(counts=tuple(int(v) for v in counts), n=n)
    hits = _count_halfspace(c, x, n, sigma, gen)
    return RawCounts(counts=(hits, n - hits), n=n)


def count_draws(c: SyntheticClassifier, x, run: SimulationRun, *,
                stream: int = 0) -> RawCounts:
    """Argmax counts from run.n i.i.d. noisy draws; pure in (c, x, run, stream)."""
    x = _as_point(c, x)
    return _draw_counts(c, x, run.n, run.sigma, _stream(run.seed, stream))


def softmax_draws(c: SyntheticClassifier, x, run: SimulationRun, *,
                  stream: int = 0) -> SoftmaxSums:
    """Summed softmax scores from run.n noisy draws.

    FixedDistribution is read as a constant softmax output (every draw
    returns probs exactly); LinearTwoClass maps its noisy margin through a
    logistic link, a stand-in for a two-class softmax head.
    """
    x = _as_point(c, x)
    if isinstance(c, FixedDistribution):
        return SoftmaxSums(sums=tuple(p * run.n for p in c.probs), n=run.n)
    gen = _stream(run.seed, stream)
    w = np.asarray(c.weights, dtype=float)
    base = float(w @ x) + c.offset
    total0 = 0.0
    remaining = run.n
    while remaining > 0:
        block = min(remaining, max(1, _CHUNK // w.size))
        z = gen.standard_normal((block, w.size))
        scores = base + run.sigma * (z @ w)
        total0 += float(np.sum(1.0 / (1.0 + np.exp(-scores))))
        remaining -= block
    total0 = min(total0, float(run.n))
    return SoftmaxSums(sums=(total0, run.n - total0), n=run.n)


def multinomial_certify(c: SyntheticClassifier, x, run: SimulationRun,
                        cfg: EnsembleConfig,
                        opt: OptimizerSettings = DEFAULT_OPTIMIZER, *,
                        stream: int = 0) -> CertificationOutcome:
    """One-stage multinomial procedure: a single batch of run.n draws serves
    class selection and certification; top-2 counts get Bonferroni
    Clopper-Pearson bounds, then every enabled mechanism certifies them."""
    if cfg.mode is not ExpectationMode.MULTINOMIAL:
        raise ValidationError("multinomial_certify needs a multinomial ensemble")
    counts = count_draws(c, x, run, stream=stream)
    bounds = bound_multinomial(counts, run.alpha)
    return certify_ensemble(bounds, run.noise(), cfg, opt)


def softmax_certify(c: SyntheticClassifier, x, run: SimulationRun,
                    cfg: EnsembleConfig,
                    opt: OptimizerSettings = DEFAULT_OPTIMIZER, *,
                    stream: int = 0) -> CertificationOutcome:
    """One-stage softmax procedure: mean scores bounded by Hoeffding, then
    certified by the DP mechanisms."""
    if cfg.mode is not ExpectationMode.SOFTMAX:
        raise ValidationError("softmax_certify needs a softmax ensemble")
    sums = softmax_draws(c, x, run, stream=stream)
    bounds = bound_softmax(sums, run.alpha)
    return certify_ensemble(bounds, run.noise(), cfg, opt)


def _binomial_eval(c: SyntheticClassifier, x, run: SimulationRun,
                   stream: int) -> tuple[RawCounts, int, float]:
    """Shared two-stage evaluation: estimation counts, selected class and
    the one-sided lower bound on its frequency."""
    x = _as_point(c, x)
    gen = _stream(run.seed, stream)
    selection = _draw_counts(c, x, run.n0, run.sigma, gen)
    top, _ = max(enumerate(selection.counts), key=lambda kv: (kv[1], -kv[0]))
    estimation = _draw_counts(c, x, run.n, run.sigma, gen)
    e0 = beta_interval(estimation.counts[top], run.n, run.alpha,
                       IntervalSide.LOWER)
    return estimation, top, e0


def binomial_certify_original(c: SyntheticClassifier, x, run: SimulationRun,
                              opt: OptimizerSettings = DEFAULT_OPTIMIZER, *,
                              stream: int = 0) -> CertificationOutcome:
    """Two-stage binomial procedure: pick the class from n0 draws, then lower
    bound only that class's frequency from a fresh batch of n draws.

    When the small selection batch picks the wrong class, the second stage
    cannot recover (it never looks at the other classes), so the procedure
    abstains far more often than the one-stage multinomial route on
    borderline inputs.  Only the Gaussian-quantile certificate applies, with
    its e0 > 0.5 gate; the one-sided bound uses the full alpha budget since
    a single interval is estimated.
    """
    _, top, e0 = _binomial_eval(c, x, run, stream)
    radius = 0.0
    if e0 > 0.5:
        radius = run.sigma * std_normal_quantile(e0)
    return CertificationOutcome(
        predicted_class=top,
        radius_cohen=radius,
        radius_ensemble=radius,
        abstained=radius == 0.0,
    )


def binomial_bounds(c: SyntheticClassifier, x, run: SimulationRun, *,
                    stream: int = 0) -> ExpectationBounds:
    """The bounds implied by the two-stage procedure, for record keeping.

    The binomial route never observes a runner-up, so e1 is reported as the
    entire remaining mass 1 - e0 (the implicit adversary of the one-vs-rest
    comparison).
    """
    _, top, e0 = _binomial_eval(c, x, run, stream)
    return ExpectationBounds(e0=clamp_unit(e0), e1=clamp_unit(1.0 - e0),
                             mode=ExpectationMode.MULTINOMIAL, n=run.n,
                             alpha=run.alpha, predicted_class=top)


def simulate_record(c: SyntheticClassifier, x, run: SimulationRun,
                    algorithm: str, cfg: EnsembleConfig | None = None,
                    opt: OptimizerSettings = DEFAULT_OPTIMIZER, *,
                    stream: int = 0, sample_id: str | None = None):
    """One replicate end to end, as a SampleRecord.

    ``algorithm`` is "multinomial", "softmax" or "binomial"; the label is the
    argmax of the exact smoothed distribution.  Deterministic in
    (c, x, run, algorithm, stream), independent of batch order.
    """
    from .analysis import SampleRecord  # local import avoids a module cycle
    from .ensemble import default_ensemble

    truth = smoothed_truth(c, x, run.sigma)
    label = max(range(len(truth)), key=lambda k: (truth[k], -k))
    sid = sample_id if sample_id is not None else f"sample-{stream:06d}"
    if algorithm == "multinomial":
        counts = count_draws(c, x, run, stream=stream)
        bounds = bound_multinomial(counts, run.alpha)
        outcome = certify_ensemble(
            bounds, run.noise(), cfg or default_ensemble(ExpectationMode.MULTINOMIAL), opt)
        return SampleRecord(sample_id=sid, label=label, counts=counts,
                            bounds=bounds, outcome=outcome)
    if algorithm == "softmax":
        sums = softmax_draws(c, x, run, stream=stream)
        bounds = bound_softmax(sums, run.alpha)
        outcome = certify_ensemble(
            bounds, run.noise(), cfg or default_ensemble(ExpectationMode.SOFTMAX), opt)
        return SampleRecord(sample_id=sid, label=label, sums=sums,
                            bounds=bounds, outcome=outcome)
    if algorithm == "binomial":
        estimation, top, e0 = _binomial_eval(c, x, run, stream)
        radius = run.sigma * std_normal_quantile(e0) if e0 > 0.5 else 0.0
        outcome = CertificationOutcome(
            predicted_class=top, radius_cohen=radius, radius_ensemble=radius,
            abstained=radius == 0.0)
        bounds = ExpectationBounds(
            e0=clamp_unit(e0), e1=clamp_unit(1.0 - e0),
            mode=ExpectationMode.MULTINOMIAL, n=run.n, alpha=run.alpha,
            predicted_class=top)
        return SampleRecord(sample_id=sid, label=label, counts=estimation,
                            bounds=bounds, outcome=outcome)
    raise ValidationError(f"unknown algorithm {algorithm!r}")


def truth_radius(c: SyntheticClassifier, x, sigma: float) -> float:
    """Gaussian-quantile radius computed from the exact smoothed probability.

    For LinearTwoClass this equals sigma * margin, the true distance from x
    to the decision boundary scaled by ||w||, so certified radii from
    estimated bounds should stay below it except with the confidence
    failure probability.
    """
    p = smoothed_truth(c, x, sigma)
    top = max(range(len(p)), key=lambda k: (p[k], -k))
    p0 = clamp_unit(p[top])
    if p0 <= 0.5:
        return 0.0
    return sigma * std_normal_quantile(p0)
