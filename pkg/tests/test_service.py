import numpy as np
import pytest
from fastapi.testclient import TestClient

from smoothcert.core import ExpectationMode, NoiseConfig, make_bounds
from smoothcert.ensemble import certify_ensemble, default_ensemble, full_ensemble
from smoothcert.mechanisms import MechanismId
from smoothcert.service.app import app

MULT = ExpectationMode.MULTINOMIAL


@pytest.fixture(scope="module")
def client():
    return TestClient(app)


class TestHealth:
    def test_health(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        body = resp.json()
        assert body["status"] == "ok"


class TestCertifyEndpoint:
    def test_matches_library(self, client):
        resp = client.post("/certify", json={"e0": 0.9, "e1": 0.05,
                                             "mode": "multinomial",
                                             "sigma": 1.0})
        assert resp.status_code == 200
        body = resp.json()
        direct = certify_ensemble(make_bounds(0.9, 0.05, MULT),
                                  NoiseConfig(sigma=1.0), full_ensemble(MULT))
        assert body["radius_cohen"] == direct.radius_cohen
        assert body["radius_li"] == direct.radius_li
        assert body["radius_improved_dp"] == direct.radius_improved_dp
        assert body["radius_ensemble"] == direct.radius_ensemble
        assert body["largest"] == "cohen"
        assert body["abstained"] is False

    def test_validation_error_shape(self, client):
        resp = client.post("/certify", json={"e0": 1.5, "e1": 0.0})
        assert resp.status_code == 422
        assert resp.json()["detail"]["type"] == "validation"

    def test_softmax_restricts_mechanisms(self, client):
        resp = client.post("/certify", json={"e0": 0.9, "e1": 0.05,
                                             "mode": "softmax",
                                             "mechanisms": ["cohen"]})
        assert resp.status_code == 422

    def test_mechanism_subset(self, client):
        resp = client.post("/certify", json={"e0": 0.9, "e1": 0.05,
                                             "mechanisms": ["li"]})
        body = resp.json()
        assert body["radius_cohen"] == 0.0
        assert body["radius_ensemble"] == body["radius_li"]

    def test_custom_optimizer(self, client):
        resp = client.post("/certify",
                           json={"e0": 0.8, "e1": 0.1,
                                 "optimizer": {"grid_points": 50}})
        assert resp.status_code == 200


class TestSweepEndpoint:
    def test_shapes_and_masking(self, client):
        resp = client.post("/sweep", json={"resolution": 6, "sigma": 1.0,
                                           "mode": "multinomial"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["mechanisms"] == ["cohen", "li", "lecuyer", "improved_dp"]
        assert len(body["e0_axis"]) == 6
        assert len(body["radii"]["cohen"]) == 6
        assert body["radii"]["cohen"][0][5] is None  # infeasible corner
        assert body["region"][0][5] is None

    def test_diff_and_ratio_panels(self, client):
        resp = client.post("/sweep", json={
            "resolution": 5, "mode": "multinomial",
            "diffs": [["cohen", "li"]],
            "ratios": [{"numerator": "improved_dp",
                        "denominators": ["lecuyer", "li", "cohen"]}]})
        body = resp.json()
        assert "cohen_minus_li" in body["diffs"]
        assert "improved_dp_over_lecuyer_li_cohen" in body["ratios"]

    def test_softmax_mode_uses_dp_mechanisms(self, client):
        resp = client.post("/sweep", json={"resolution": 5, "mode": "softmax"})
        body = resp.json()
        assert body["mechanisms"] == ["lecuyer", "improved_dp"]


def dataset_payload():
    return {
        "mode": "multinomial", "sigma": 1.0, "alpha": 0.01,
        "threshold": 0.05, "baseline": "cohen",
        "records": [
            {"sample_id": "b", "label": 0, "n": 1000, "counts": [900, 80, 20]},
            {"sample_id": "a", "label": 1, "n": 1000, "counts": [700, 250, 50]},
            {"sample_id": "c", "label": 0, "n": 1000, "counts": [400, 350, 250]},
        ],
    }


class TestDatasetEndpoint:
    def test_records_sorted_and_certified(self, client):
        resp = client.post("/dataset", json=dataset_payload())
        assert resp.status_code == 200
        body = resp.json()
        assert [r["sample_id"] for r in body["records"]] == ["a", "b", "c"]
        assert body["records"][1]["radius_ensemble"] > 0.0
        assert body["summary"]["num_samples"] == 3
        assert body["summary"]["top1_accuracy"] == pytest.approx(2.0 / 3.0)
        assert "ensemble" in body["curves"]

    def test_missing_counts_rejected(self, client):
        payload = dataset_payload()
        del payload["records"][0]["counts"]
        resp = client.post("/dataset", json=payload)
        assert resp.status_code == 422

    def test_softmax_route(self, client):
        payload = {
            "mode": "softmax", "alpha": 0.001,
            "records": [{"sample_id": "x", "label": 0, "n": 1000,
                         "sums": [800.0, 150.0, 50.0]}],
        }
        resp = client.post("/dataset", json=payload)
        assert resp.status_code == 200
        rec = resp.json()["records"][0]
        assert rec["radius_cohen"] == 0.0
        assert rec["radius_improved_dp"] >= rec["radius_lecuyer"]

    def test_curves_none_without_labels(self, client):
        payload = dataset_payload()
        payload["records"][0]["label"] = None
        resp = client.post("/dataset", json=payload)
        assert resp.json()["curves"] is None


class TestSimulateEndpoint:
    def payload(self, **overrides):
        base = {"classifier": {"kind": "fixed", "probs": [0.85, 0.1, 0.05]},
                "algorithm": "multinomial", "replicates": 3, "n": 2000,
                "alpha": 0.01, "seed": 9}
        base.update(overrides)
        return base

    def test_deterministic(self, client):
        a = client.post("/simulate", json=self.payload()).json()
        b = client.post("/simulate", json=self.payload()).json()
        assert a == b

    def test_seed_changes_results(self, client):
        a = client.post("/simulate", json=self.payload()).json()
        b = client.post("/simulate", json=self.payload(seed=10)).json()
        assert a != b

    def test_default_mechanisms_follow_procedure(self, client):
        body = client.post("/simulate", json=self.payload()).json()
        rec = body["records"][0]
        assert rec["radius_lecuyer"] == 0.0  # not part of the one-stage set
        assert rec["counts"] is not None

    def test_binomial_algorithm(self, client):
        body = client.post("/simulate",
                           json=self.payload(algorithm="binomial",
                                             n0=100)).json()
        rec = body["records"][0]
        assert rec["radius_li"] == 0.0
        assert rec["radius_ensemble"] == rec["radius_cohen"]

    def test_softmax_algorithm(self, client):
        body = client.post("/simulate", json=self.payload(
            algorithm="softmax",
            classifier={"kind": "linear", "weights": [1.0], "offset": 1.5},
            x=[0.0])).json()
        rec = body["records"][0]
        assert rec["sums"] is not None
        assert rec["mode"] == "softmax"

    def test_linear_needs_weights(self, client):
        resp = client.post("/simulate", json=self.payload(
            classifier={"kind": "linear"}))
        assert resp.status_code == 422


class TestAnalyzeEndpoint:
    def test_roundtrip_from_dataset(self, client):
        ds = client.post("/dataset", json=dataset_payload()).json()
        resp = client.post("/analyze", json={"records": ds["records"],
                                             "threshold": 0.05,
                                             "baseline": "cohen"})
        assert resp.status_code == 200
        body = resp.json()
        assert body["summary"] == ds["summary"]

    def test_empty_rejected(self, client):
        resp = client.post("/analyze", json={"records": []})
        assert resp.status_code == 422
