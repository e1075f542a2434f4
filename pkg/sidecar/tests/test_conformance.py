"""Wire-protocol conformance against the extraction package's own client and CLI.

Starts a real HTTP server around a freshly pretrained bundle, then drives the
``bvsp`` pipeline (select, predict, vote, eval) through it as a subprocess,
exactly as a user would.
"""

from __future__ import annotations

import json
import subprocess
import sys
import threading
import time
from pathlib import Path

import pytest
import requests
import uvicorn

from bvsp_sidecar.model import ModelConfig, state_digest
from bvsp_sidecar.server import create_app
from bvsp_sidecar.training import pretrain, train_prefixes

FIXTURE = Path(__file__).resolve().parents[2] / "src" / "bvsp" / "data" / "fixture_reviews.txt"


@pytest.fixture(scope="module")
def endpoint():
    bundle, _ = pretrain(
        FIXTURE,
        ModelConfig(seed=5, dropout=0.1),
        epochs=3,
        batch_size=16,
    )
    train_prefixes(bundle, FIXTURE, template_ids=["gas", "paraphrase"], epochs=1, batch_size=8)
    digest_before = state_digest(bundle.model)

    app = create_app(bundle=bundle)
    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 30
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.05)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}", bundle, digest_before
    server.should_exit = True
    thread.join(timeout=10)


def bvsp(*args) -> subprocess.CompletedProcess:
    return subprocess.run(
        [sys.executable, "-m", "bvsp.cli", *map(str, args)],
        capture_output=True,
        text=True,
    )


class TestProtocolConformance:
    def test_health(self, endpoint):
        url, _, _ = endpoint
        body = requests.get(url + "/health", timeout=10).json()
        assert body["status"] == "ok"
        assert body["vocab_size"] > 0

    def test_score_passes_primary_invariants(self, endpoint):
        url, _, _ = endpoint
        target = "room_overall is great because room is clean"
        body = requests.post(
            url + "/score",
            json={
                "input_text": "The room is clean.",
                "target_text": target,
                "template_id": "paraphrase",
                "top_m": 50,
            },
            timeout=30,
        ).json()
        # recorded once against this tokenizer before the build: 7 tokens
        assert len(body["tokens"]) == 7
        assert len(body["distributions"]) == 7
        rebuilt_ends = 0
        for token in body["tokens"]:
            assert target[token["start"] : token["end"]] == token["text"]
            assert token["start"] >= rebuilt_ends
            assert not target[rebuilt_ends : token["start"]].strip()
            rebuilt_ends = token["end"]
        for dist in body["distributions"]:
            total = sum(p for _, p in dist["support"]) + dist["other_mass"]
            assert abs(total - 1.0) <= 1e-4
            assert all(p >= 0.0 for _, p in dist["support"])

    def test_primary_remote_client_accepts_responses(self, endpoint):
        url, _, _ = endpoint
        # the primary's own client validates all invariants on construction
        from bvsp.remote import RemoteScorer
        from bvsp.scoring import plain_target

        scorer = RemoteScorer(endpoint=url, timeout_ms=30_000)
        scored = scorer.score("The room is clean.", plain_target("(room, room_overall, great, clean)"), "gas")
        assert len(scored) >= 1
        text = scorer.generate("The room is clean.", "gas", num_beams=1)
        assert isinstance(text, str)

    def test_base_weights_untouched_by_serving(self, endpoint):
        url, bundle, digest_before = endpoint
        requests.post(
            url + "/generate",
            json={"input_text": "Staff were friendly.", "template_id": "gas", "num_beams": 1},
            timeout=60,
        )
        assert state_digest(bundle.model) == digest_before


class TestPipelineSmoke:
    def test_select_predict_vote_eval_via_remote(self, endpoint, tmp_path):
        url, _, _ = endpoint
        data = tmp_path / "five.txt"
        data.write_text(
            "".join(FIXTURE.read_text("utf8").splitlines(keepends=True)[:5]), encoding="utf8"
        )

        matrix = tmp_path / "matrix.tsv"
        selected = tmp_path / "selected.json"
        result = bvsp(
            "select", "--k", 3, "--support", data, "--scorer", "remote",
            "--endpoint", url, "--timeout-ms", 60_000,
            "--out", matrix, "--selected-out", selected,
        )
        assert result.returncode == 0, result.stderr
        assert len(matrix.read_text().splitlines()) == 27
        ids = json.loads(selected.read_text())["selected"]
        assert len(ids) == 3

        preds = tmp_path / "preds.jsonl"
        result = bvsp(
            "predict", "--data", data, "--selection", selected, "--scorer", "remote",
            "--endpoint", url, "--timeout-ms", 60_000, "--out", preds,
        )
        assert result.returncode == 0, result.stderr
        rows = [json.loads(line) for line in preds.read_text().splitlines()]
        assert len(rows) == 15  # 5 sentences x 3 templates
        assert {row["template_id"] for row in rows} == set(ids)

        final = tmp_path / "final.jsonl"
        result = bvsp("vote", "--tau", 2, "--in", preds, "--out", final)
        assert result.returncode == 0, result.stderr
        final_rows = [json.loads(line) for line in final.read_text().splitlines()]
        assert {row["sentence_id"] for row in final_rows} == {"1", "2", "3", "4", "5"}

        report = tmp_path / "report.json"
        result = bvsp("eval", "--gold", data, "--pred", final, "--report", report)
        assert result.returncode == 0, result.stderr
        payload = json.loads(report.read_text())
        assert set(payload) >= {"precision", "recall", "f1", "quad"}
