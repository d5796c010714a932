import logging

import numpy as np
import pytest

from smoothcert.analysis import (SampleRecord, region_of_superiority,
                                 summarize, sweep_simplex)
from smoothcert.confidence import RawCounts, SoftmaxSums
from smoothcert.core import (CertificationOutcome, ExpectationBounds,
                             ExpectationMode, NoiseConfig)
from smoothcert.datafiles import (ParseError, emit_boundaries, emit_counts,
                                  emit_curve, emit_grid, emit_matrix,
                                  emit_region, emit_samples, emit_softmax,
                                  emit_summary, ingest_counts, ingest_samples,
                                  ingest_softmax, sniff_format)
from smoothcert.mechanisms import MechanismId

MULT = ExpectationMode.MULTINOMIAL


def sample_record(i: int) -> SampleRecord:
    radii = (0.1 * i, 0.15 * i, 0.05 * i, 0.12 * i)
    outcome = CertificationOutcome(
        predicted_class=i % 3, radius_cohen=radii[0], radius_li=radii[1],
        radius_lecuyer=radii[2], radius_improved_dp=radii[3],
        radius_ensemble=max(radii), abstained=max(radii) == 0.0)
    bounds = ExpectationBounds(e0=0.5 + 0.04 * i, e1=0.01 * i + 0.001,
                               mode=MULT, n=1000, alpha=0.001,
                               predicted_class=i % 3)
    return SampleRecord(sample_id=f"s{i:03d}", label=i % 3, bounds=bounds,
                        outcome=outcome,
                        region=MechanismId.LI if i % 2 else None)


class TestCountsRoundTrip:
    def test_roundtrip_identical_records(self, tmp_path):
        records = [
            SampleRecord(sample_id="a", label=0,
                         counts=RawCounts(counts=(70, 20, 10), n=100)),
            SampleRecord(sample_id="b", label=None,
                         counts=RawCounts(counts=(55, 30, 15), n=100)),
        ]
        path = tmp_path / "counts.csv"
        emit_counts(records, path)
        assert ingest_counts(path) == records

    def test_header(self, tmp_path):
        path = tmp_path / "counts.csv"
        emit_counts([SampleRecord(sample_id="a", label=1,
                                  counts=RawCounts(counts=(9, 1), n=10))], path)
        assert path.read_text().splitlines()[0] == "sample_id,label,n,c0,c1"

    def test_bad_sum_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("sample_id,label,n,c0,c1\nok,0,10,9,1\nbad,0,10,5,4\n")
        with pytest.raises(ParseError) as err:
            ingest_counts(path)
        assert ":3:" in str(err.value)

    def test_malformed_value_names_row(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("sample_id,label,n,c0,c1\nok,0,10,9,x\n")
        with pytest.raises(ParseError) as err:
            ingest_counts(path)
        assert ":2:" in str(err.value)

    def test_wrong_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("id,label,n,c0,c1\nok,0,10,9,1\n")
        with pytest.raises(ParseError) as err:
            ingest_counts(path)
        assert ":1:" in str(err.value)

    def test_empty_file_warns(self, tmp_path, caplog):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with caplog.at_level(logging.WARNING):
            assert ingest_counts(path) == []
        assert "empty" in caplog.text

    def test_missing_label_allowed(self, tmp_path):
        path = tmp_path / "counts.csv"
        path.write_text("sample_id,label,n,c0,c1\na,,10,9,1\n")
        records = ingest_counts(path)
        assert records[0].label is None


class TestSoftmaxRoundTrip:
    def test_roundtrip(self, tmp_path):
        records = [SampleRecord(sample_id="a", label=0,
                                sums=SoftmaxSums(sums=(8.25, 1.75), n=10))]
        path = tmp_path / "sums.csv"
        emit_softmax(records, path)
        assert ingest_softmax(path) == records

    def test_sniff(self, tmp_path):
        counts = tmp_path / "c.csv"
        counts.write_text("sample_id,label,n,c0,c1\na,0,10,9,1\n")
        sums = tmp_path / "s.csv"
        sums.write_text("sample_id,label,n,s0,s1\na,0,10,8.5,1.5\n")
        assert sniff_format(counts) == "counts"
        assert sniff_format(sums) == "softmax"

    def test_mean_invariant_checked(self, tmp_path):
        path = tmp_path / "s.csv"
        path.write_text("sample_id,label,n,s0,s1\na,0,10,9.5,1.5\n")
        with pytest.raises(ParseError):
            ingest_softmax(path)


class TestSamplesRoundTrip:
    def test_emit_ingest_emit_is_fixed_point(self, tmp_path):
        records = [sample_record(i) for i in range(6)]
        first = tmp_path / "one.csv"
        second = tmp_path / "two.csv"
        emit_samples(records, first)
        emit_samples(ingest_samples(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_fields_survive(self, tmp_path):
        path = tmp_path / "samples.csv"
        emit_samples([sample_record(3)], path)
        back = ingest_samples(path)[0]
        assert back.sample_id == "s003"
        assert back.label == 0
        assert back.region is MechanismId.LI
        assert back.outcome.radius_li == pytest.approx(0.45, rel=1e-9)
        assert back.bounds.mode is MULT
        assert back.bounds.n == 1000

    def test_ingest_rejects_bad_mode(self, tmp_path):
        path = tmp_path / "samples.csv"
        emit_samples([sample_record(1)], path)
        text = path.read_text().replace("multinomial", "gaussian")
        path.write_text(text)
        with pytest.raises(ParseError):
            ingest_samples(path)


class TestSummaryAndGrid:
    def test_summary_file_schema(self, tmp_path):
        records = [sample_record(i) for i in range(1, 5)]
        summary = summarize(records)
        path = tmp_path / "summary.csv"
        emit_summary(summary, path)
        lines = path.read_text().splitlines()
        assert lines[0] == "metric,value"
        metrics = {line.split(",")[0] for line in lines[1:]}
        assert "median_radius_cohen" in metrics
        assert "wilcoxon_p" in metrics
        assert "infinite_pct_count" in metrics

    def test_grid_and_region_files(self, tmp_path):
        grid = sweep_simplex((MechanismId.COHEN, MechanismId.LI),
                             NoiseConfig(sigma=1.0), 4, MULT)
        paths = emit_grid(grid, tmp_path)
        assert [p.endswith("sweep_cohen.csv") or p.endswith("sweep_li.csv")
                for p in paths] == [True, True]
        lines = (tmp_path / "sweep_cohen.csv").read_text().splitlines()
        assert lines[0].startswith("e0/e1,")
        assert len(lines) == 5
        # infeasible corner is blank
        assert lines[1].endswith(",,")
        region = region_of_superiority(grid)
        emit_region(region, grid, tmp_path / "region.csv")
        emit_boundaries(region, tmp_path / "boundaries.csv")
        assert (tmp_path / "region.csv").read_text().count("cohen") >= 1
        assert (tmp_path / "boundaries.csv").read_text().splitlines()[0] == \
            "mechanism_a,mechanism_b,x1,y1,x2,y2"

    def test_matrix_masked_cells_empty(self, tmp_path):
        matrix = np.array([[1.0, np.nan], [0.5, 2.0]])
        emit_matrix(matrix, [0.0, 1.0], [0.0, 1.0], tmp_path / "m.csv")
        lines = (tmp_path / "m.csv").read_text().splitlines()
        assert lines[1] == "0,1,"
        assert lines[2] == "1,0.5,2"

    def test_curve_file(self, tmp_path):
        emit_curve([(0.0, 1.0), (0.5, 0.25)], tmp_path / "curve.csv")
        assert (tmp_path / "curve.csv").read_text() == \
            "r,certified_accuracy\n0,1\n0.5,0.25\n"
