"""Pydantic request/response models for the certification service."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, Field

ModeName = Literal["multinomial", "softmax"]
MechanismName = Literal["cohen", "li", "lecuyer", "improved_dp"]
AlgorithmName = Literal["multinomial", "softmax", "binomial"]


class OptimizerModel(BaseModel):
    grid_points: int = 200
    refine_iters: int = 60
    omega_max: float = 500.0
    eps_min: float = 1e-4
    eps_cap: float = 50.0
    bisect_tol: float = 1e-9


class CertifyRequest(BaseModel):
    e0: float
    e1: float
    mode: ModeName = "multinomial"
    sigma: float = 1.0
    delta_sens: float = 1.0
    mechanisms: list[MechanismName] | None = None
    optimizer: OptimizerModel | None = None


class OutcomeModel(BaseModel):
    predicted_class: int
    e0: float
    e1: float
    radius_cohen: float
    radius_li: float
    radius_lecuyer: float
    radius_improved_dp: float
    radius_ensemble: float
    abstained: bool
    largest: MechanismName


class RatioSpec(BaseModel):
    numerator: MechanismName
    denominators: list[MechanismName] = Field(min_length=1)


class BoundaryModel(BaseModel):
    a: MechanismName
    b: MechanismName
    x1: float
    y1: float
    x2: float
    y2: float


class SweepRequest(BaseModel):
    resolution: int = 200
    sigma: float = 1.0
    delta_sens: float = 1.0
    mode: ModeName = "multinomial"
    mechanisms: list[MechanismName] | None = None
    diffs: list[tuple[MechanismName, MechanismName]] = []
    ratios: list[RatioSpec] = []
    optimizer: OptimizerModel | None = None


Matrix = list[list[float | None]]


class SweepResponse(BaseModel):
    resolution: int
    sigma: float
    delta_sens: float
    mode: ModeName
    mechanisms: list[MechanismName]
    e0_axis: list[float]
    e1_axis: list[float]
    radii: dict[MechanismName, Matrix]
    region: list[list[MechanismName | None]]
    boundaries: list[BoundaryModel]
    diffs: dict[str, Matrix]
    ratios: dict[str, Matrix]


class EvidenceRecord(BaseModel):
    sample_id: str
    label: int | None = None
    n: int
    counts: list[int] | None = None
    sums: list[float] | None = None


class DatasetRequest(BaseModel):
    mode: ModeName = "multinomial"
    sigma: float = 1.0
    delta_sens: float = 1.0
    alpha: float = 0.001
    mechanisms: list[MechanismName] | None = None
    threshold: float = 0.05
    baseline: MechanismName = "cohen"
    curve_points: int = 0
    records: list[EvidenceRecord]
    optimizer: OptimizerModel | None = None


class SampleModel(BaseModel):
    sample_id: str
    label: int | None = None
    predicted_class: int
    mode: ModeName
    n: int
    alpha: float
    e0: float
    e1: float
    radius_cohen: float
    radius_li: float
    radius_lecuyer: float
    radius_improved_dp: float
    radius_ensemble: float
    abstained: bool
    region: MechanismName | None = None
    counts: list[int] | None = None
    sums: list[float] | None = None


class MechanismStatsModel(BaseModel):
    median_radius: float
    proportion_largest: float
    proportion_above_threshold: float


class ImprovementModel(BaseModel):
    baseline: MechanismName
    wilcoxon_statistic: float
    wilcoxon_p: float
    proportion_improved: float
    median_improvement: float
    mean_improvement: float | None
    median_pct_improvement: float | None
    mean_pct_improvement: float | None
    infinite_pct_count: int


class SummaryModel(BaseModel):
    num_samples: int
    threshold: float
    top1_accuracy: float | None
    abstention_rate: float
    mechanisms: dict[MechanismName, MechanismStatsModel]
    ensemble_median_radius: float
    ensemble_proportion_above_threshold: float
    improvement: ImprovementModel


Curve = list[tuple[float, float]]


class DatasetResponse(BaseModel):
    records: list[SampleModel]
    summary: SummaryModel
    curves: dict[str, Curve] | None = None


class ClassifierModel(BaseModel):
    kind: Literal["fixed", "linear"]
    probs: list[float] | None = None
    weights: list[float] | None = None
    offset: float = 0.0


class SimulateRequest(BaseModel):
    classifier: ClassifierModel
    x: list[float] | None = None
    algorithm: AlgorithmName = "multinomial"
    replicates: int = 1
    n: int = 100000
    n0: int = 100
    sigma: float = 1.0
    alpha: float = 0.001
    seed: int = 0
    delta_sens: float = 1.0
    mechanisms: list[MechanismName] | None = None
    threshold: float = 0.05
    baseline: MechanismName = "cohen"
    curve_points: int = 0
    optimizer: OptimizerModel | None = None


class AnalyzeRequest(BaseModel):
    records: list[SampleModel]
    threshold: float = 0.05
    baseline: MechanismName = "cohen"
    curve_points: int = 0


class HealthResponse(BaseModel):
    status: str
    version: str
