from __future__ import annotations

from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from bvsp_sidecar.model import ModelConfig
from bvsp_sidecar.server import create_app
from bvsp_sidecar.training import pretrain

FIXTURE = Path(__file__).resolve().parents[2] / "src" / "bvsp" / "data" / "fixture_reviews.txt"


@pytest.fixture(scope="module")
def client():
    bundle, _ = pretrain(
        FIXTURE,
        ModelConfig(seed=2, dropout=0.1),
        template_ids=["gas", "paraphrase"],
        epochs=2,
        batch_size=8,
    )
    with TestClient(create_app(bundle=bundle)) as test_client:
        yield test_client


class TestHealth:
    def test_ok(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"
        assert body["vocab_size"] > 0
        assert body["model_name"]


class TestScore:
    def test_distributions_normalized(self, client):
        response = client.post(
            "/score",
            json={
                "input_text": "The room is clean.",
                "target_text": "(room, room_overall, great, clean)",
                "template_id": "gas",
                "top_m": 20,
            },
        )
        assert response.status_code == 200
        body = response.json()
        assert len(body["tokens"]) == len(body["distributions"])
        for dist in body["distributions"]:
            total = sum(p for _, p in dist["support"]) + dist["other_mass"]
            assert abs(total - 1.0) <= 1e-4
            assert dist["other_mass"] >= 0.0

    def test_spans_reconstruct_target(self, client):
        target = "room_overall is great because room is clean"
        body = client.post(
            "/score",
            json={"input_text": "x", "target_text": target, "template_id": "paraphrase"},
        ).json()
        for token in body["tokens"]:
            assert target[token["start"] : token["end"]] == token["text"]

    def test_top_m_respected(self, client):
        body = client.post(
            "/score",
            json={"input_text": "x", "target_text": "room is clean", "template_id": "gas", "top_m": 5},
        ).json()
        assert all(len(d["support"]) <= 5 for d in body["distributions"])

    def test_malformed_request_422(self, client):
        assert client.post("/score", json={"input_text": "x"}).status_code == 422
        assert (
            client.post(
                "/score",
                json={"input_text": "x", "target_text": "", "template_id": "gas"},
            ).status_code
            == 422
        )


class TestGenerate:
    def test_beam_one(self, client):
        response = client.post(
            "/generate",
            json={"input_text": "The room is clean.", "template_id": "gas", "num_beams": 1},
        )
        assert response.status_code == 200
        assert isinstance(response.json()["output_text"], str)

    def test_deterministic(self, client):
        payload = {"input_text": "The pool was great.", "template_id": "gas", "num_beams": 1}
        a = client.post("/generate", json=payload).json()
        b = client.post("/generate", json=payload).json()
        assert a == b

    def test_zero_beams_422(self, client):
        response = client.post(
            "/generate", json={"input_text": "x", "template_id": "gas", "num_beams": 0}
        )
        assert response.status_code == 422


class TestLoading:
    def test_503_before_model_ready(self):
        with TestClient(create_app(model_dir=None)) as client:
            assert client.get("/health").status_code == 503
            assert (
                client.post(
                    "/score",
                    json={"input_text": "x", "target_text": "y", "template_id": "gas"},
                ).status_code
                == 503
            )
