"""HTTP service implementing the scoring wire protocol.

Endpoints:

* ``POST /score``    — teacher-forced top-m distributions with token char spans
* ``POST /generate`` — beam-search generation (beam size from the request)
* ``GET /health``    — liveness plus model metadata

Malformed request bodies get HTTP 422 (pydantic validation); while the model
is still loading every endpoint answers 503.
"""

from __future__ import annotations

import logging
import threading
from contextlib import asynccontextmanager
from pathlib import Path

import torch
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .model import ModelBundle
from .tokenizer import tokenize

logger = logging.getLogger(__name__)


class ScoreRequest(BaseModel):
    input_text: str
    target_text: str = Field(min_length=1)
    template_id: str
    prefix_id: str | None = None
    top_m: int = Field(default=50, ge=1)


class GenerateRequest(BaseModel):
    input_text: str
    template_id: str
    prefix_id: str | None = None
    num_beams: int = Field(default=1, ge=1)


class Engine:
    """Thread-safe scoring/generation facade over a loaded bundle."""

    def __init__(self, bundle: ModelBundle, model_name: str = "seq2seq-soft-prompt"):
        self.bundle = bundle
        self.model_name = model_name
        self._lock = threading.Lock()

    def _prefix(self, template_id: str, prefix_id: str | None) -> torch.Tensor | None:
        entry = self.bundle.prefixes.get(prefix_id or template_id)
        return entry.tensor if entry is not None else None

    def score(self, request: ScoreRequest) -> dict:
        vocab = self.bundle.vocab
        spans = tokenize(request.target_text)
        if not spans:
            raise HTTPException(status_code=422, detail="target_text holds no tokens")
        src_ids = vocab.encode(request.input_text) or [vocab.unk_id]
        tgt_ids = [vocab.stoi.get(span.text, vocab.unk_id) for span in spans]
        prefix = self._prefix(request.template_id, request.prefix_id)
        with self._lock:
            probs = self.bundle.model.score_distributions(src_ids, tgt_ids, vocab, prefix=prefix)
        distributions = []
        for row in probs:
            top = torch.topk(row, k=min(request.top_m, row.numel()))
            support = [
                [vocab.itos[token_id], float(p)]
                for p, token_id in zip(top.values.tolist(), top.indices.tolist())
            ]
            other = max(0.0, 1.0 - sum(p for _, p in support))
            distributions.append({"support": support, "other_mass": other})
        return {
            "tokens": [{"text": s.text, "start": s.start, "end": s.end} for s in spans],
            "distributions": distributions,
        }

    def generate(self, request: GenerateRequest) -> dict:
        vocab = self.bundle.vocab
        src_ids = vocab.encode(request.input_text) or [vocab.unk_id]
        prefix = self._prefix(request.template_id, request.prefix_id)
        with self._lock:
            ids = self.bundle.model.generate_ids(
                src_ids, vocab, prefix=prefix, num_beams=request.num_beams
            )
        return {"output_text": vocab.decode(ids)}

    def health(self) -> dict:
        return {
            "status": "ok",
            "model_name": self.model_name,
            "vocab_size": len(self.bundle.vocab),
            "prefixes": self.bundle.prefixes.ids(),
            "version": __version__,
        }


def create_app(model_dir: str | Path | None = None, bundle: ModelBundle | None = None) -> FastAPI:
    """Build the service; pass a ready bundle (tests) or a directory to load."""
    state: dict[str, Engine | None] = {"engine": Engine(bundle) if bundle is not None else None}

    @asynccontextmanager
    async def lifespan(_: FastAPI):
        if state["engine"] is None and model_dir is not None:
            logger.info("loading model bundle from %s", model_dir)
            state["engine"] = Engine(ModelBundle.load(Path(model_dir)))
        yield

    app = FastAPI(title="bvsp-sidecar", version=__version__, lifespan=lifespan)

    def _engine() -> Engine:
        engine = state["engine"]
        if engine is None:
            raise HTTPException(status_code=503, detail="model is still loading")
        return engine

    @app.post("/score")
    def score(request: ScoreRequest) -> dict:
        return _engine().score(request)

    @app.post("/generate")
    def generate(request: GenerateRequest) -> dict:
        return _engine().generate(request)

    @app.get("/health")
    def health() -> dict:
        return _engine().health()

    return app
