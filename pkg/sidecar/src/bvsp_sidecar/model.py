"""A compact encoder-decoder transformer with optional soft-prompt prefixes.

The base model is small enough to pretrain on a laptop-scale corpus in
minutes. Soft prompts are per-template parameter blocks prepended to the
encoder input embeddings; the base weights stay frozen while prompts train
(see ``training.py``). Insertion scheme and prefix length live in
:class:`ModelConfig`, not in code.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn

from .tokenizer import Vocab


@dataclass
class ModelConfig:
    d_model: int = 64
    nhead: int = 4
    num_encoder_layers: int = 2
    num_decoder_layers: int = 2
    dim_feedforward: int = 128
    dropout: float = 0.1
    max_len: int = 192
    prefix_length: int = 8
    prefix_insertion: str = "encoder_input"
    seed: int = 0
    # optimization defaults; overridable per invocation
    pretrain_epochs: int = 20
    pretrain_batch_size: int = 16
    pretrain_lr: float = 3e-4
    finetune_epochs: int = 20
    finetune_batch_size: int = 8
    finetune_lr: float = 3e-4

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelConfig":
        return cls(**json.loads(text))


class Seq2SeqLM(nn.Module):
    """Embedding + nn.Transformer + tied-free LM head, batch-first."""

    def __init__(self, vocab_size: int, config: ModelConfig):
        super().__init__()
        torch.manual_seed(config.seed)
        self.config = config
        self.vocab_size = vocab_size
        self.embed = nn.Embedding(vocab_size, config.d_model)
        self.positions = nn.Embedding(config.max_len + config.prefix_length, config.d_model)
        self.transformer = nn.Transformer(
            d_model=config.d_model,
            nhead=config.nhead,
            num_encoder_layers=config.num_encoder_layers,
            num_decoder_layers=config.num_decoder_layers,
            dim_feedforward=config.dim_feedforward,
            dropout=config.dropout,
            batch_first=True,
        )
        # keep the reference (non-nested-tensor) encoder path: identical
        # numerics in train and eval, no left-alignment constraint on masks
        self.transformer.encoder.use_nested_tensor = False
        self.lm_head = nn.Linear(config.d_model, vocab_size)
        self.scale = math.sqrt(config.d_model)

    def _with_positions(self, embedded: torch.Tensor) -> torch.Tensor:
        length = embedded.size(1)
        if length > self.positions.num_embeddings:
            raise ValueError(f"sequence of {length} exceeds max length {self.positions.num_embeddings}")
        index = torch.arange(length, device=embedded.device)
        return embedded * self.scale + self.positions(index)

    def _encoder_input(
        self, src_ids: torch.Tensor, prefix: torch.Tensor | None, pad_id: int
    ) -> tuple[torch.Tensor, torch.Tensor]:
        batch = src_ids.size(0)
        embedded = self.embed(src_ids)
        padding = src_ids.eq(pad_id)
        if prefix is not None:
            block = prefix.unsqueeze(0).expand(batch, -1, -1)
            embedded = torch.cat([block, embedded], dim=1)
            keep = torch.zeros(batch, prefix.size(0), dtype=torch.bool, device=src_ids.device)
            padding = torch.cat([keep, padding], dim=1)
        return self._with_positions(embedded), padding

    def forward(
        self,
        src_ids: torch.Tensor,
        tgt_in_ids: torch.Tensor,
        pad_id: int,
        prefix: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Logits [batch, tgt_len, vocab] for teacher-forced decoding."""
        src, src_padding = self._encoder_input(src_ids, prefix, pad_id)
        tgt = self._with_positions(self.embed(tgt_in_ids))
        tgt_mask = torch.triu(
            torch.ones(tgt_in_ids.size(1), tgt_in_ids.size(1), dtype=torch.bool, device=src_ids.device),
            diagonal=1,
        )
        out = self.transformer(
            src,
            tgt,
            tgt_mask=tgt_mask,
            src_key_padding_mask=src_padding,
            tgt_key_padding_mask=tgt_in_ids.eq(pad_id),
            memory_key_padding_mask=src_padding,
        )
        return self.lm_head(out)

    @torch.no_grad()
    def score_distributions(
        self,
        src_ids: list[int],
        tgt_ids: list[int],
        vocab: Vocab,
        prefix: torch.Tensor | None = None,
    ) -> torch.Tensor:
        """Probabilities [tgt_len, vocab]: row t conditions on tgt_ids[:t]."""
        self.eval()
        src = torch.tensor([src_ids], dtype=torch.long)
        dec_in = torch.tensor([[vocab.bos_id] + tgt_ids[:-1]], dtype=torch.long)
        logits = self.forward(src, dec_in, pad_id=vocab.pad_id, prefix=prefix)
        return torch.softmax(logits[0], dim=-1)

    @torch.no_grad()
    def generate_ids(
        self,
        src_ids: list[int],
        vocab: Vocab,
        prefix: torch.Tensor | None = None,
        num_beams: int = 1,
        max_len: int = 96,
    ) -> list[int]:
        """Beam search (beam 1 = greedy); deterministic, stops at EOS."""
        if num_beams < 1:
            raise ValueError("num_beams must be >= 1")
        self.eval()
        src = torch.tensor([src_ids], dtype=torch.long)
        src_embedded, src_padding = self._encoder_input(src, prefix, vocab.pad_id)
        memory = self.transformer.encoder(src_embedded, src_key_padding_mask=src_padding)

        beams: list[tuple[float, list[int], bool]] = [(0.0, [vocab.bos_id], False)]
        for _ in range(max_len):
            if all(done for _, _, done in beams):
                break
            candidates: list[tuple[float, list[int], bool]] = []
            for log_prob, ids, done in beams:
                if done:
                    candidates.append((log_prob, ids, True))
                    continue
                dec_in = torch.tensor([ids], dtype=torch.long)
                tgt = self._with_positions(self.embed(dec_in))
                tgt_mask = torch.triu(torch.ones(len(ids), len(ids), dtype=torch.bool), diagonal=1)
                out = self.transformer.decoder(
                    tgt, memory, tgt_mask=tgt_mask, memory_key_padding_mask=src_padding
                )
                step = torch.log_softmax(self.lm_head(out[0, -1]), dim=-1)
                top = torch.topk(step, k=min(num_beams, step.numel()))
                for value, token in zip(top.values.tolist(), top.indices.tolist()):
                    candidates.append(
                        (log_prob + value, ids + [token], token == vocab.eos_id)
                    )
            candidates.sort(key=lambda c: (-c[0], c[1]))
            beams = candidates[:num_beams]
        best = max(beams, key=lambda c: c[0])
        ids = best[1][1:]  # strip BOS
        if ids and ids[-1] == vocab.eos_id:
            ids = ids[:-1]
        return ids


def state_digest(model: nn.Module) -> str:
    """SHA-256 over the model's parameters; detects any base-weight drift."""
    digest = hashlib.sha256()
    for name, tensor in sorted(model.state_dict().items()):
        digest.update(name.encode("utf8"))
        digest.update(tensor.detach().cpu().numpy().tobytes())
    return digest.hexdigest()


@dataclass
class PrefixEntry:
    """Trained soft prompt for one template plus training metadata."""

    tensor: torch.Tensor
    length: int
    corpus_digest: str

    def to_payload(self) -> dict:
        return {
            "tensor": self.tensor.detach().cpu(),
            "length": self.length,
            "corpus_digest": self.corpus_digest,
        }

    @classmethod
    def from_payload(cls, payload: dict) -> "PrefixEntry":
        return cls(
            tensor=payload["tensor"],
            length=int(payload["length"]),
            corpus_digest=payload["corpus_digest"],
        )


class PrefixStore:
    """template id -> soft prompt block; one prefix per template."""

    def __init__(self):
        self._entries: dict[str, PrefixEntry] = {}

    def put(self, template_id: str, entry: PrefixEntry) -> None:
        self._entries[template_id] = entry

    def get(self, template_id: str) -> PrefixEntry | None:
        return self._entries.get(template_id)

    def ids(self) -> list[str]:
        return sorted(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def save(self, path: Path) -> None:
        torch.save({tid: e.to_payload() for tid, e in self._entries.items()}, path)

    @classmethod
    def load(cls, path: Path) -> "PrefixStore":
        store = cls()
        payload = torch.load(path, map_location="cpu", weights_only=True)
        for tid, entry in payload.items():
            store.put(tid, PrefixEntry.from_payload(entry))
        return store


@dataclass
class ModelBundle:
    """Everything the server needs: config, vocab, frozen base, prefixes."""

    config: ModelConfig
    vocab: Vocab
    model: Seq2SeqLM
    prefixes: PrefixStore = field(default_factory=PrefixStore)

    def save(self, model_dir: Path) -> None:
        model_dir.mkdir(parents=True, exist_ok=True)
        (model_dir / "config.json").write_text(self.config.to_json() + "\n", encoding="utf8")
        (model_dir / "vocab.json").write_text(
            json.dumps(self.vocab.to_list(), ensure_ascii=False) + "\n", encoding="utf8"
        )
        torch.save(self.model.state_dict(), model_dir / "base.pt")
        self.prefixes.save(model_dir / "prefixes.pt")

    @classmethod
    def load(cls, model_dir: Path) -> "ModelBundle":
        model_dir = Path(model_dir)
        config = ModelConfig.from_json((model_dir / "config.json").read_text("utf8"))
        vocab = Vocab.from_list(json.loads((model_dir / "vocab.json").read_text("utf8")))
        model = Seq2SeqLM(len(vocab), config)
        model.load_state_dict(torch.load(model_dir / "base.pt", map_location="cpu", weights_only=True))
        model.eval()
        prefixes_path = model_dir / "prefixes.pt"
        prefixes = PrefixStore.load(prefixes_path) if prefixes_path.exists() else PrefixStore()
        return cls(config=config, vocab=vocab, model=model, prefixes=prefixes)
