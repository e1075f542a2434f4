from __future__ import annotations

import pytest
import torch

from bvsp_sidecar.model import (
    ModelBundle,
    ModelConfig,
    PrefixEntry,
    PrefixStore,
    Seq2SeqLM,
    state_digest,
)
from bvsp_sidecar.tokenizer import Vocab


@pytest.fixture(scope="module")
def vocab():
    return Vocab.build(["the room is clean .", "( room , room_overall , great , clean )"])


@pytest.fixture(scope="module")
def model(vocab):
    return Seq2SeqLM(len(vocab), ModelConfig(seed=3, dropout=0.0))


class TestForward:
    def test_logit_shape(self, model, vocab):
        src = torch.tensor([vocab.encode("the room is clean .")])
        tgt = torch.tensor([[vocab.bos_id] + vocab.encode("room is")])
        logits = model(src, tgt, pad_id=vocab.pad_id)
        assert logits.shape == (1, tgt.size(1), len(vocab))

    def test_score_rows_are_distributions(self, model, vocab):
        probs = model.score_distributions(
            vocab.encode("the room"), vocab.encode("room is clean"), vocab
        )
        sums = probs.sum(dim=-1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-5)

    def test_scoring_deterministic(self, model, vocab):
        src, tgt = vocab.encode("the room"), vocab.encode("room is clean")
        a = model.score_distributions(src, tgt, vocab)
        b = model.score_distributions(src, tgt, vocab)
        assert torch.equal(a, b)

    def test_prefix_changes_distributions(self, model, vocab):
        src, tgt = vocab.encode("the room"), vocab.encode("room is clean")
        base = model.score_distributions(src, tgt, vocab)
        prefix = torch.full((model.config.prefix_length, model.config.d_model), 0.8)
        with_prefix = model.score_distributions(src, tgt, vocab, prefix=prefix)
        assert not torch.allclose(base, with_prefix)

    def test_causal_masking(self, model, vocab):
        # distribution at position t must not depend on later target tokens
        src = vocab.encode("the room")
        tgt_a = vocab.encode("room is clean")
        tgt_b = vocab.encode("room is great")  # same first two tokens
        a = model.score_distributions(src, tgt_a, vocab)
        b = model.score_distributions(src, tgt_b, vocab)
        assert torch.allclose(a[:3], b[:3], atol=1e-6)


class TestGenerate:
    def test_greedy_deterministic(self, model, vocab):
        src = vocab.encode("the room is clean .")
        a = model.generate_ids(src, vocab, num_beams=1)
        b = model.generate_ids(src, vocab, num_beams=1)
        assert a == b

    def test_beam_accepts_width(self, model, vocab):
        src = vocab.encode("the room")
        out = model.generate_ids(src, vocab, num_beams=3, max_len=12)
        assert isinstance(out, list)

    def test_zero_beams_rejected(self, model, vocab):
        with pytest.raises(ValueError):
            model.generate_ids(vocab.encode("x"), vocab, num_beams=0)

    def test_respects_max_len(self, model, vocab):
        out = model.generate_ids(vocab.encode("the"), vocab, num_beams=1, max_len=5)
        assert len(out) <= 5


class TestPersistence:
    def test_bundle_roundtrip(self, tmp_path, vocab, model):
        store = PrefixStore()
        store.put(
            "gas",
            PrefixEntry(
                tensor=torch.randn(8, model.config.d_model), length=8, corpus_digest="abc"
            ),
        )
        bundle = ModelBundle(config=model.config, vocab=vocab, model=model, prefixes=store)
        bundle.save(tmp_path / "m")
        again = ModelBundle.load(tmp_path / "m")
        assert state_digest(again.model) == state_digest(model)
        assert again.vocab.stoi == vocab.stoi
        assert again.prefixes.ids() == ["gas"]
        assert torch.equal(again.prefixes.get("gas").tensor, store.get("gas").tensor)

    def test_digest_tracks_changes(self, vocab):
        model = Seq2SeqLM(len(vocab), ModelConfig(seed=1))
        before = state_digest(model)
        with torch.no_grad():
            next(model.parameters()).add_(1.0)
        assert state_digest(model) != before
