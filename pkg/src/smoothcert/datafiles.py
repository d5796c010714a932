"""Delimited text formats for counts, softmax sums, per-sample results,
summaries and sweep grids.

All files are UTF-8, comma-delimited, "\n"-terminated.  Counts and sums are
stored raw (not as means) so confidence bounds can be recomputed from exact
integer evidence.  Radii and expectation bounds print with 9 significant
digits, proportions with 4; re-emitting ingested records reproduces files
byte for byte.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from collections.abc import Iterable, Sequence

import numpy as np

from .analysis import (DatasetSummary, RegionMap, SampleRecord, SweepGrid)
from .confidence import RawCounts, SoftmaxSums
from .core import (CertificationOutcome, ExpectationBounds, ExpectationMode,
                   ValidationError)
from .mechanisms import MECHANISM_ORDER, MechanismId

log = logging.getLogger(__name__)


class ParseError(ValueError):
    """A data file violates its schema; the message names file and line."""

    def __init__(self, path, line: int, message: str) -> None:
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


def _g9(v: float) -> str:
    return f"{v:.9g}"


def _g4(v: float) -> str:
    return f"{v:.4g}"


def _opt(v) -> str:
    return "" if v is None else str(v)


SAMPLE_COLUMNS = (
    "sample_id", "label", "predicted_class", "mode", "n", "alpha", "e0", "e1",
    "radius_cohen", "radius_li", "radius_lecuyer", "radius_improved_dp",
    "radius_ensemble", "abstained", "region",
)


def _open_read(path):
    return open(path, "r", encoding="utf-8", newline="")


def _open_write(path):
    return open(path, "w", encoding="utf-8", newline="\n")


def _evidence_header(kind: str, k: int) -> list[str]:
    prefix = "c" if kind == "counts" else "s"
    return ["sample_id", "label", "n"] + [f"{prefix}{i}" for i in range(k)]


def _parse_label(raw: str, path, line: int) -> int | None:
    if raw == "":
        return None
    try:
        return int(raw)
    except ValueError:
        raise ParseError(path, line, f"label {raw!r} is not an integer") from None


def _ingest_evidence(path, kind: str) -> list[SampleRecord]:
    with _open_read(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        log.warning("%s: empty file, no samples ingested", path)
        return []
    header = rows[0]
    if len(header) < 5 or header[:3] != ["sample_id", "label", "n"]:
        raise ParseError(path, 1, f"unexpected header {header!r}")
    k = len(header) - 3
    if header != _evidence_header(kind, k):
        raise ParseError(path, 1,
                         f"header {header!r} does not match the {kind} schema")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ParseError(path, lineno,
                             f"expected {len(header)} fields, got {len(row)}")
        sample_id = row[0]
        label = _parse_label(row[1], path, lineno)
        try:
            n = int(row[2])
        except ValueError:
            raise ParseError(path, lineno, f"n {row[2]!r} is not an integer") from None
        try:
            if kind == "counts":
                values = tuple(int(v) for v in row[3:])
            else:
                values = tuple(float(v) for v in row[3:])
        except ValueError:
            raise ParseError(path, lineno, "malformed per-class value") from None
        try:
            if kind == "counts":
                record = SampleRecord(sample_id=sample_id, label=label,
                                      counts=RawCounts(counts=values, n=n))
            else:
                record = SampleRecord(sample_id=sample_id, label=label,
                                      sums=SoftmaxSums(sums=values, n=n))
        except ValidationError as exc:
            raise ParseError(path, lineno, str(exc)) from None
        records.append(record)
    return records


def ingest_counts(path) -> list[SampleRecord]:
    """Read a multinomial count file (header sample_id,label,n,c0,...)."""
    return _ingest_evidence(path, "counts")


def ingest_softmax(path) -> list[SampleRecord]:
    """Read a softmax sum file (header sample_id,label,n,s0,...)."""
    return _ingest_evidence(path, "sums")


def sniff_format(path) -> str:
    """Guess "counts" or "softmax" from the header of an evidence file."""
    with _open_read(path) as fh:
        header = fh.readline().strip().split(",")
    if len(header) > 3 and header[3].startswith("s"):
        return "softmax"
    return "counts"


def emit_counts(records: Iterable[SampleRecord], path) -> None:
    records = list(records)
    k = max((len(r.counts.counts) for r in records if r.counts), default=2)
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_evidence_header("counts", k))
        for r in records:
            if r.counts is None:
                raise ValidationError(f"record {r.sample_id} has no counts")
            w.writerow([r.sample_id, _opt(r.label), r.counts.n, *r.counts.counts])


def emit_softmax(records: Iterable[SampleRecord], path) -> None:
    records = list(records)
    k = max((len(r.sums.sums) for r in records if r.sums), default=2)
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(_evidence_header("sums", k))
        for r in records:
            if r.sums is None:
                raise ValidationError(f"record {r.sample_id} has no softmax sums")
            w.writerow([r.sample_id, _opt(r.label), r.sums.n,
                        *[_g9(s) for s in r.sums.sums]])


def emit_samples(records: Iterable[SampleRecord], path) -> None:
    """Write certified per-sample results (one row per sample)."""
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SAMPLE_COLUMNS)
        for r in records:
            if r.outcome is None or r.bounds is None:
                raise ValidationError(f"record {r.sample_id} is not certified")
            o, b = r.outcome, r.bounds
            w.writerow([
                r.sample_id, _opt(r.label), o.predicted_class, b.mode.value,
                b.n, _g9(b.alpha), _g9(b.e0), _g9(b.e1),
                _g9(o.radius_cohen), _g9(o.radius_li), _g9(o.radius_lecuyer),
                _g9(o.radius_improved_dp), _g9(o.radius_ensemble),
                int(o.abstained), r.region.value if r.region else "",
            ])


def ingest_samples(path) -> list[SampleRecord]:
    """Read back a per-sample results file."""
    with _open_read(path) as fh:
        rows = list(csv.reader(fh))
    if not rows:
        log.warning("%s: empty file, no samples ingested", path)
        return []
    if rows[0] != list(SAMPLE_COLUMNS):
        raise ParseError(path, 1, f"unexpected header {rows[0]!r}")
    records = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(SAMPLE_COLUMNS):
            raise ParseError(path, lineno,
                             f"expected {len(SAMPLE_COLUMNS)} fields, got {len(row)}")
        try:
            bounds = ExpectationBounds(
                e0=float(row[6]), e1=float(row[7]),
                mode=ExpectationMode(row[3]), n=int(row[4]),
                alpha=float(row[5]), predicted_class=int(row[2]))
            outcome = CertificationOutcome(
                predicted_class=int(row[2]),
                radius_cohen=float(row[8]), radius_li=float(row[9]),
                radius_lecuyer=float(row[10]), radius_improved_dp=float(row[11]),
                radius_ensemble=float(row[12]), abstained=bool(int(row[13])))
            region = MechanismId(row[14]) if row[14] else None
            records.append(SampleRecord(
                sample_id=row[0], label=_parse_label(row[1], path, lineno),
                bounds=bounds, outcome=outcome, region=region))
        except (ValueError, ValidationError) as exc:
            if isinstance(exc, ParseError):
                raise
            raise ParseError(path, lineno, str(exc)) from None
    return records


def summary_rows(summary: DatasetSummary) -> list[tuple[str, str]]:
    """Flatten a summary into ordered (metric, value) pairs."""
    rows = [
        ("num_samples", str(summary.num_samples)),
        ("threshold", _g9(summary.threshold)),
        ("top1_accuracy",
         "" if summary.top1_accuracy is None else _g4(summary.top1_accuracy)),
        ("abstention_rate", _g4(summary.abstention_rate)),
    ]
    for m in MECHANISM_ORDER:
        st = summary.mechanisms[m]
        rows.append((f"median_radius_{m.value}", _g9(st.median_radius)))
        rows.append((f"proportion_largest_{m.value}", _g4(st.proportion_largest)))
        rows.append((f"proportion_above_threshold_{m.value}",
                     _g4(st.proportion_above_threshold)))
    imp = summary.improvement
    rows += [
        ("ensemble_median_radius", _g9(summary.ensemble_median_radius)),
        ("ensemble_proportion_above_threshold",
         _g4(summary.ensemble_proportion_above_threshold)),
        ("baseline", imp.baseline.value),
        ("wilcoxon_statistic", _g9(imp.wilcoxon_statistic)),
        ("wilcoxon_p", _g4(imp.wilcoxon_p)),
        ("proportion_improved", _g4(imp.proportion_improved)),
        ("median_improvement", _g9(imp.median_improvement)),
        ("mean_improvement",
         "" if imp.mean_improvement is None else _g9(imp.mean_improvement)),
        ("median_pct_improvement",
         "" if imp.median_pct_improvement is None else _g4(imp.median_pct_improvement)),
        ("mean_pct_improvement",
         "" if imp.mean_pct_improvement is None else _g4(imp.mean_pct_improvement)),
        ("infinite_pct_count", str(imp.infinite_pct_count)),
    ]
    return rows


def emit_summary(summary: DatasetSummary, path) -> None:
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "value"])
        w.writerows(summary_rows(summary))


def emit_matrix(matrix: np.ndarray, e0_axis: Sequence[float],
                e1_axis: Sequence[float], path) -> None:
    """Write one radius/diff/ratio matrix; masked (nan) cells are empty."""
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["e0/e1"] + [_g9(v) for v in e1_axis])
        for i, e0 in enumerate(e0_axis):
            row = [_g9(e0)]
            for j in range(len(e1_axis)):
                v = matrix[i, j]
                row.append("" if not np.isfinite(v) else _g9(float(v)))
            w.writerow(row)


def emit_grid(grid: SweepGrid, out_dir, prefix: str = "sweep") -> list[str]:
    """Write one matrix file per mechanism; returns the paths written."""
    paths = []
    for m in grid.mechanisms:
        path = os.path.join(out_dir, f"{prefix}_{m.value}.csv")
        emit_matrix(grid.values[m], grid.e0_axis, grid.e1_axis, path)
        paths.append(path)
    return paths


def emit_region(region: RegionMap, grid: SweepGrid, path) -> None:
    """Write the region-of-superiority map (mechanism name per cell)."""
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["e0/e1"] + [_g9(v) for v in grid.e1_axis])
        for i, e0 in enumerate(grid.e0_axis):
            row = [_g9(e0)]
            for j in range(len(grid.e1_axis)):
                m = region.mechanism_at(i, j)
                row.append("" if m is None else m.value)
            w.writerow(row)


def emit_boundaries(region: RegionMap, path) -> None:
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mechanism_a", "mechanism_b", "x1", "y1", "x2", "y2"])
        for s in region.boundaries:
            w.writerow([s.a.value, s.b.value,
                        _g9(s.x1), _g9(s.y1), _g9(s.x2), _g9(s.y2)])


def emit_curve(points: Sequence[tuple[float, float]], path) -> None:
    with _open_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["r", "certified_accuracy"])
        for r, c in points:
            w.writerow([_g9(r), _g9(c)])
