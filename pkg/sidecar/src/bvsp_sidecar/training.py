"""Base-model pretraining and frozen-base soft-prompt training."""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass
from pathlib import Path

import torch
from torch import nn
from torch.nn import functional as F

from .data import build_pairs, list_template_ids
from .model import ModelBundle, ModelConfig, PrefixEntry, PrefixStore, Seq2SeqLM, state_digest
from .tokenizer import Vocab

logger = logging.getLogger(__name__)


@dataclass
class Batch:
    src: torch.Tensor
    tgt_in: torch.Tensor
    tgt_out: torch.Tensor


def _encode_pairs(pairs: list[tuple[str, str]], vocab: Vocab) -> list[tuple[list[int], list[int]]]:
    encoded = []
    for source, target in pairs:
        tgt = vocab.encode(target) + [vocab.eos_id]
        encoded.append((vocab.encode(source), tgt))
    return encoded


def _batches(
    encoded: list[tuple[list[int], list[int]]], batch_size: int, vocab: Vocab, generator: torch.Generator
) -> list[Batch]:
    order = torch.randperm(len(encoded), generator=generator).tolist()
    out = []
    for start in range(0, len(order), batch_size):
        chunk = [encoded[i] for i in order[start : start + batch_size]]
        src_width = max(len(s) for s, _ in chunk)
        tgt_width = max(len(t) for _, t in chunk)
        src = torch.full((len(chunk), src_width), vocab.pad_id, dtype=torch.long)
        tgt_in = torch.full((len(chunk), tgt_width), vocab.pad_id, dtype=torch.long)
        tgt_out = torch.full((len(chunk), tgt_width), vocab.pad_id, dtype=torch.long)
        for row, (s, t) in enumerate(chunk):
            src[row, : len(s)] = torch.tensor(s)
            shifted = [vocab.bos_id] + t[:-1]
            tgt_in[row, : len(shifted)] = torch.tensor(shifted)
            tgt_out[row, : len(t)] = torch.tensor(t)
        out.append(Batch(src=src, tgt_in=tgt_in, tgt_out=tgt_out))
    return out


def _loss(model: Seq2SeqLM, batch: Batch, vocab: Vocab, prefix: torch.Tensor | None) -> torch.Tensor:
    logits = model(batch.src, batch.tgt_in, pad_id=vocab.pad_id, prefix=prefix)
    return F.cross_entropy(
        logits.reshape(-1, logits.size(-1)),
        batch.tgt_out.reshape(-1),
        ignore_index=vocab.pad_id,
    )


def corpus_digest(pairs: list[tuple[str, str]]) -> str:
    digest = hashlib.sha256()
    for source, target in pairs:
        digest.update(source.encode("utf8"))
        digest.update(b"\x00")
        digest.update(target.encode("utf8"))
        digest.update(b"\x01")
    return digest.hexdigest()


def pretrain(
    data_path: Path,
    config: ModelConfig,
    template_ids: list[str] | None = None,
    epochs: int | None = None,
    batch_size: int | None = None,
    lr: float | None = None,
) -> tuple[ModelBundle, list[float]]:
    """Train the base model on every template's rendered pairs, then freeze it.

    Returns the bundle plus the per-epoch mean loss curve.
    """
    template_ids = template_ids or list_template_ids()
    per_template = build_pairs(Path(data_path), template_ids)
    all_pairs = [pair for pairs in per_template.values() for pair in pairs]
    if not all_pairs:
        raise ValueError("no training pairs; is the data file empty?")
    vocab = Vocab.build([text for pair in all_pairs for text in pair])
    model = Seq2SeqLM(len(vocab), config)
    model.train()

    epochs = epochs if epochs is not None else config.pretrain_epochs
    batch_size = batch_size if batch_size is not None else config.pretrain_batch_size
    lr = lr if lr is not None else config.pretrain_lr

    encoded = _encode_pairs(all_pairs, vocab)
    optimizer = torch.optim.Adam(model.parameters(), lr=lr)
    generator = torch.Generator().manual_seed(config.seed)
    curve = []
    for epoch in range(epochs):
        total, steps = 0.0, 0
        for batch in _batches(encoded, batch_size, vocab, generator):
            optimizer.zero_grad()
            loss = _loss(model, batch, vocab, prefix=None)
            loss.backward()
            optimizer.step()
            total += loss.detach().item()
            steps += 1
        curve.append(total / steps)
        logger.info("pretrain epoch %d/%d loss %.4f", epoch + 1, epochs, curve[-1])

    model.eval()
    return ModelBundle(config=config, vocab=vocab, model=model), curve


def train_prefixes(
    bundle: ModelBundle,
    data_path: Path,
    template_ids: list[str] | None = None,
    epochs: int | None = None,
    batch_size: int | None = None,
    lr: float | None = None,
) -> tuple[PrefixStore, dict[str, list[float]]]:
    """Optimize one soft prompt per template with the base model frozen.

    Raises with the offending template id if any single prompt fails to train.
    Returns the store and per-template loss curves; the base weights are
    verified unchanged by digest.
    """
    template_ids = template_ids or list_template_ids()
    per_template = build_pairs(Path(data_path), template_ids)
    config = bundle.config
    vocab = bundle.vocab
    model = bundle.model

    epochs = epochs if epochs is not None else config.finetune_epochs
    batch_size = batch_size if batch_size is not None else config.finetune_batch_size
    lr = lr if lr is not None else config.finetune_lr

    before = state_digest(model)
    for parameter in model.parameters():
        parameter.requires_grad_(False)
    model.eval()  # keep dropout off so only the prompt moves the loss

    store = bundle.prefixes
    curves: dict[str, list[float]] = {}
    for index, template_id in enumerate(template_ids):
        pairs = per_template[template_id]
        if not pairs:
            raise RuntimeError(f"template {template_id}: no training pairs")
        try:
            generator = torch.Generator().manual_seed(config.seed + 7919 * (index + 1))
            prefix = torch.empty(config.prefix_length, config.d_model)
            torch.nn.init.normal_(prefix, mean=0.0, std=0.5, generator=generator)
            prefix = nn.Parameter(prefix)
            optimizer = torch.optim.Adam([prefix], lr=lr)
            encoded = _encode_pairs(pairs, vocab)
            curve = []
            for _ in range(epochs):
                total, steps = 0.0, 0
                for batch in _batches(encoded, batch_size, vocab, generator):
                    optimizer.zero_grad()
                    loss = _loss(model, batch, vocab, prefix=prefix)
                    loss.backward()
                    optimizer.step()
                    total += loss.detach().item()
                    steps += 1
                curve.append(total / steps)
            store.put(
                template_id,
                PrefixEntry(
                    tensor=prefix.detach().clone(),
                    length=config.prefix_length,
                    corpus_digest=corpus_digest(pairs),
                ),
            )
            curves[template_id] = curve
            logger.info(
                "prefix %s: loss %.4f -> %.4f", template_id, curve[0], curve[-1]
            )
        except Exception as exc:
            raise RuntimeError(f"prefix training failed for template {template_id}: {exc}") from exc

    after = state_digest(model)
    if before != after:
        raise RuntimeError("base model weights changed during prefix training")
    return store, curves
