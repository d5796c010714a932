"""FastAPI service exposing certification, sweeps, dataset scoring,
simulation and re-analysis over JSON.

The service is stateless: every endpoint is a pure function of its request,
so results are reproducible and instances can be scaled horizontally.  File
handling stays client-side (see the CLI); payloads carry raw evidence or
precomputed per-sample results.
"""

from __future__ import annotations

import math

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..analysis import (ENSEMBLE_FIELD, SampleRecord, certified_accuracy_curve,
                        classify_sample_region, curve_radii, diff_map,
                        ratio_map, region_of_superiority, summarize,
                        sweep_simplex)
from ..confidence import (RawCounts, SoftmaxSums, bound_multinomial,
                          bound_softmax)
from ..core import (CertificationOutcome, ExpectationBounds, ExpectationMode,
                    NoiseConfig, NumericError, ValidationError, make_bounds)
from ..ensemble import (EnsembleConfig, certify_ensemble, default_ensemble,
                        full_ensemble, largest_mechanism)
from ..mechanisms import (DEFAULT_OPTIMIZER, MECHANISM_ORDER, MechanismId,
                          OptimizerSettings)
from ..simulate import (FixedDistribution, LinearTwoClass, SimulationRun,
                        simulate_record)
from . import schemas as sch

app = FastAPI(title="smoothcert", version=__version__,
              description="Certified-robustness radii for smoothed classifiers")


@app.exception_handler(ValidationError)
async def _validation_handler(request, exc: ValidationError):
    return JSONResponse(status_code=422,
                        content={"detail": {"type": "validation",
                                            "message": str(exc)}})


@app.exception_handler(NumericError)
async def _numeric_handler(request, exc: NumericError):
    return JSONResponse(status_code=500,
                        content={"detail": {"type": "numeric",
                                            "message": str(exc)}})


def _mode(name: str) -> ExpectationMode:
    return ExpectationMode(name)


def _optimizer(model: sch.OptimizerModel | None) -> OptimizerSettings:
    if model is None:
        return DEFAULT_OPTIMIZER
    return OptimizerSettings(**model.model_dump())


def _ensemble_cfg(mechanisms: list[str] | None, mode: ExpectationMode) -> EnsembleConfig:
    if mechanisms is None:
        return full_ensemble(mode)
    return EnsembleConfig(enabled=frozenset(MechanismId(m) for m in mechanisms),
                          mode=mode)


def _matrix(arr: np.ndarray) -> list[list[float | None]]:
    return [[None if not math.isfinite(v) else float(v) for v in row]
            for row in arr.tolist()]


def _outcome_model(b: ExpectationBounds, o: CertificationOutcome,
                   cfg: EnsembleConfig) -> sch.OutcomeModel:
    return sch.OutcomeModel(
        predicted_class=o.predicted_class, e0=b.e0, e1=b.e1,
        radius_cohen=o.radius_cohen, radius_li=o.radius_li,
        radius_lecuyer=o.radius_lecuyer, radius_improved_dp=o.radius_improved_dp,
        radius_ensemble=o.radius_ensemble, abstained=o.abstained,
        largest=largest_mechanism(o, cfg.enabled).value)


@app.get("/health", response_model=sch.HealthResponse)
def health() -> sch.HealthResponse:
    return sch.HealthResponse(status="ok", version=__version__)


@app.post("/certify", response_model=sch.OutcomeModel)
def certify_endpoint(req: sch.CertifyRequest) -> sch.OutcomeModel:
    mode = _mode(req.mode)
    bounds = make_bounds(req.e0, req.e1, mode)
    noise = NoiseConfig(sigma=req.sigma, delta_sens=req.delta_sens)
    cfg = _ensemble_cfg(req.mechanisms, mode)
    outcome = certify_ensemble(bounds, noise, cfg, _optimizer(req.optimizer))
    return _outcome_model(bounds, outcome, cfg)


@app.post("/sweep", response_model=sch.SweepResponse)
def sweep_endpoint(req: sch.SweepRequest) -> sch.SweepResponse:
    mode = _mode(req.mode)
    noise = NoiseConfig(sigma=req.sigma, delta_sens=req.delta_sens)
    cfg = _ensemble_cfg(req.mechanisms, mode)
    opt = _optimizer(req.optimizer)
    grid = sweep_simplex(cfg.enabled, noise, req.resolution, mode, opt)
    region = region_of_superiority(grid)
    region_cells = [[None if k < 0 else MECHANISM_ORDER[k].value
                     for k in row] for row in region.argmax.tolist()]
    boundaries = [sch.BoundaryModel(a=s.a.value, b=s.b.value, x1=s.x1,
                                    y1=s.y1, x2=s.x2, y2=s.y2)
                  for s in region.boundaries]
    diffs = {}
    for a, b in req.diffs:
        key = f"{a}_minus_{b}"
        diffs[key] = _matrix(diff_map(grid, MechanismId(a), MechanismId(b)))
    ratios = {}
    for spec in req.ratios:
        dens = [MechanismId(d) for d in spec.denominators]
        key = f"{spec.numerator}_over_" + "_".join(spec.denominators)
        ratios[key] = _matrix(ratio_map(grid, MechanismId(spec.numerator), dens))
    return sch.SweepResponse(
        resolution=req.resolution, sigma=req.sigma, delta_sens=req.delta_sens,
        mode=req.mode,
        mechanisms=[m.value for m in grid.mechanisms],
        e0_axis=[float(v) for v in grid.e0_axis],
        e1_axis=[float(v) for v in grid.e1_axis],
        radii={m.value: _matrix(grid.values[m]) for m in grid.mechanisms},
        region=region_cells, boundaries=boundaries, diffs=diffs, ratios=ratios)


def _sample_model(r: SampleRecord) -> sch.SampleModel:
    b, o = r.bounds, r.outcome
    return sch.SampleModel(
        sample_id=r.sample_id, label=r.label,
        predicted_class=o.predicted_class, mode=b.mode.value, n=b.n,
        alpha=b.alpha, e0=b.e0, e1=b.e1,
        radius_cohen=o.radius_cohen, radius_li=o.radius_li,
        radius_lecuyer=o.radius_lecuyer, radius_improved_dp=o.radius_improved_dp,
        radius_ensemble=o.radius_ensemble, abstained=o.abstained,
        region=r.region.value if r.region else None,
        counts=list(r.counts.counts) if r.counts else None,
        sums=list(r.sums.sums) if r.sums else None)


def _record_from_model(m: sch.SampleModel) -> SampleRecord:
    bounds = ExpectationBounds(e0=m.e0, e1=m.e1, mode=_mode(m.mode), n=m.n,
                               alpha=m.alpha, predicted_class=m.predicted_class)
    outcome = CertificationOutcome(
        predicted_class=m.predicted_class, radius_cohen=m.radius_cohen,
        radius_li=m.radius_li, radius_lecuyer=m.radius_lecuyer,
        radius_improved_dp=m.radius_improved_dp,
        radius_ensemble=m.radius_ensemble, abstained=m.abstained)
    counts = RawCounts(counts=tuple(m.counts), n=m.n) if m.counts else None
    sums = SoftmaxSums(sums=tuple(m.sums), n=m.n) if m.sums else None
    region = MechanismId(m.region) if m.region else None
    return SampleRecord(sample_id=m.sample_id, label=m.label, counts=counts,
                        sums=sums, bounds=bounds, outcome=outcome, region=region)


def _curves(records: list[SampleRecord], cfg_mechanisms, points: int):
    if any(r.label is None for r in records):
        return None
    radii = curve_radii(records, points)
    out = {}
    for m in MECHANISM_ORDER:
        if m in cfg_mechanisms:
            out[m.value] = certified_accuracy_curve(records, radii, m)
    out[ENSEMBLE_FIELD] = certified_accuracy_curve(records, radii, ENSEMBLE_FIELD)
    return out


def _summary_model(summary) -> sch.SummaryModel:
    imp = summary.improvement
    return sch.SummaryModel(
        num_samples=summary.num_samples, threshold=summary.threshold,
        top1_accuracy=summary.top1_accuracy,
        abstention_rate=summary.abstention_rate,
        mechanisms={m.value: sch.MechanismStatsModel(
            median_radius=st.median_radius,
            proportion_largest=st.proportion_largest,
            proportion_above_threshold=st.proportion_above_threshold)
            for m, st in summary.mechanisms.items()},
        ensemble_median_radius=summary.ensemble_median_radius,
        ensemble_proportion_above_threshold=summary.ensemble_proportion_above_threshold,
        improvement=sch.ImprovementModel(
            baseline=imp.baseline.value,
            wilcoxon_statistic=imp.wilcoxon_statistic,
            wilcoxon_p=imp.wilcoxon_p,
            proportion_improved=imp.proportion_improved,
            median_improvement=imp.median_improvement,
            mean_improvement=imp.mean_improvement,
            median_pct_improvement=imp.median_pct_improvement,
            mean_pct_improvement=imp.mean_pct_improvement,
            infinite_pct_count=imp.infinite_pct_count))


@app.post("/dataset", response_model=sch.DatasetResponse)
def dataset_endpoint(req: sch.DatasetRequest) -> sch.DatasetResponse:
    mode = _mode(req.mode)
    noise = NoiseConfig(sigma=req.sigma, delta_sens=req.delta_sens)
    cfg = _ensemble_cfg(req.mechanisms, mode)
    opt = _optimizer(req.optimizer)
    if not req.records:
        raise ValidationError("no records to certify")
    records = []
    for rec in req.records:
        if mode is ExpectationMode.MULTINOMIAL:
            if rec.counts is None:
                raise ValidationError(f"record {rec.sample_id} lacks counts")
            counts = RawCounts(counts=tuple(rec.counts), n=rec.n)
            bounds = bound_multinomial(counts, req.alpha)
            sums = None
        else:
            if rec.sums is None:
                raise ValidationError(f"record {rec.sample_id} lacks softmax sums")
            sums = SoftmaxSums(sums=tuple(rec.sums), n=rec.n)
            bounds = bound_softmax(sums, req.alpha)
            counts = None
        outcome = certify_ensemble(bounds, noise, cfg, opt)
        region = classify_sample_region(bounds, noise, cfg.enabled, opt)
        records.append(SampleRecord(
            sample_id=rec.sample_id, label=rec.label, counts=counts, sums=sums,
            bounds=bounds, outcome=outcome, region=region))
    records.sort(key=lambda r: r.sample_id)
    summary = summarize(records, threshold=req.threshold,
                        baseline=MechanismId(req.baseline))
    return sch.DatasetResponse(
        records=[_sample_model(r) for r in records],
        summary=_summary_model(summary),
        curves=_curves(records, cfg.enabled, req.curve_points))


@app.post("/simulate", response_model=sch.DatasetResponse)
def simulate_endpoint(req: sch.SimulateRequest) -> sch.DatasetResponse:
    if req.classifier.kind == "fixed":
        if not req.classifier.probs:
            raise ValidationError("fixed classifier needs probs")
        classifier = FixedDistribution(probs=tuple(req.classifier.probs))
    else:
        if not req.classifier.weights:
            raise ValidationError("linear classifier needs weights")
        classifier = LinearTwoClass(weights=tuple(req.classifier.weights),
                                    offset=req.classifier.offset)
    if req.replicates < 1:
        raise ValidationError("replicates must be >= 1")
    run = SimulationRun(seed=req.seed, n=req.n, n0=req.n0, sigma=req.sigma,
                        alpha=req.alpha)
    noise = NoiseConfig(sigma=req.sigma, delta_sens=req.delta_sens)
    opt = _optimizer(req.optimizer)
    if req.algorithm == "binomial":
        cfg = None  # binomial route certifies with the quantile bound only
    else:
        mode = _mode(req.algorithm)
        # the one-stage procedures default to their standard mechanism sets
        cfg = (default_ensemble(mode) if req.mechanisms is None
               else _ensemble_cfg(req.mechanisms, mode))
    records = []
    for i in range(req.replicates):
        rec = simulate_record(classifier, req.x, run, req.algorithm, cfg, opt,
                              stream=i)
        region = None
        if cfg is not None:
            region = classify_sample_region(rec.bounds, noise, cfg.enabled, opt)
        elif not rec.outcome.abstained:
            region = MechanismId.COHEN
        records.append(SampleRecord(
            sample_id=rec.sample_id, label=rec.label, counts=rec.counts,
            sums=rec.sums, bounds=rec.bounds, outcome=rec.outcome,
            region=region))
    summary = summarize(records, threshold=req.threshold,
                        baseline=MechanismId(req.baseline))
    enabled = cfg.enabled if cfg is not None else (MechanismId.COHEN,)
    return sch.DatasetResponse(
        records=[_sample_model(r) for r in records],
        summary=_summary_model(summary),
        curves=_curves(records, enabled, req.curve_points))


@app.post("/analyze", response_model=sch.DatasetResponse)
def analyze_endpoint(req: sch.AnalyzeRequest) -> sch.DatasetResponse:
    if not req.records:
        raise ValidationError("no records to analyze")
    records = sorted((_record_from_model(m) for m in req.records),
                     key=lambda r: r.sample_id)
    summary = summarize(records, threshold=req.threshold,
                        baseline=MechanismId(req.baseline))
    return sch.DatasetResponse(
        records=[_sample_model(r) for r in records],
        summary=_summary_model(summary),
        curves=_curves(records, MECHANISM_ORDER, req.curve_points))
