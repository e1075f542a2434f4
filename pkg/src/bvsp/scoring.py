"""Teacher-forced sequence scoring behind one interface.

A scorer returns, for every token of a fixed target sequence, a sparse
probability distribution over next tokens (top-m entries plus an aggregate
OTHER bucket). Two implementations exist: the deterministic reference
scorer below, which needs no model, and the HTTP client in
:mod:`bvsp.remote` that relays a real language model's distributions.
"""

from __future__ import annotations

import hashlib
import math
import random
import re
from abc import ABC, abstractmethod
from collections import defaultdict
from dataclasses import dataclass

from .quads import SurfaceQuad
from .templates import TargetSequence, get_template, render

PROB_FLOOR = 1e-12
_SUM_TOL = 1e-6

# Whitespace tokens with punctuation split off; the markers stay whole.
_TOKEN_RE = re.compile(r"\[SSEP\]|\[AT\]|\[OT\]|\[AC\]|\[SP\]|\w+|[^\w\s]")


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


def tokenize(text: str) -> tuple[Token, ...]:
    """Reference tokenization with character spans."""
    return tuple(Token(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text))


@dataclass(frozen=True)
class TokenDistribution:
    """Sparse next-token distribution: top entries plus an OTHER bucket."""

    support: tuple[tuple[str, float], ...]
    other_mass: float = 0.0

    def __post_init__(self) -> None:
        keys = [k for k, _ in self.support]
        if len(keys) != len(set(keys)):
            raise ValueError("support entries must have distinct keys")
        total = self.other_mass
        for key, prob in self.support:
            if prob < 0.0:
                raise ValueError(f"negative probability {prob!r} for {key!r}")
            total += prob
        if self.other_mass < 0.0:
            raise ValueError(f"negative other_mass {self.other_mass!r}")
        if not (1.0 - _SUM_TOL <= total <= 1.0 + _SUM_TOL):
            raise ValueError(f"probabilities sum to {total!r}, expected 1 within {_SUM_TOL}")

    def prob(self, token: str) -> float:
        """Probability of ``token``; falls back to the OTHER bucket."""
        for key, value in self.support:
            if key == token:
                return value
        return self.other_mass

    def as_dict(self) -> dict[str, float]:
        return dict(self.support)

    def entropy(self) -> float:
        """Shannon entropy in nats, OTHER treated as a single outcome."""
        h = 0.0
        for _, p in self.support:
            if p > 0.0:
                h -= p * math.log(p)
        if self.other_mass > 0.0:
            h -= self.other_mass * math.log(self.other_mass)
        return h


@dataclass(frozen=True)
class ScoredTarget:
    """A target sequence with one distribution per token position."""

    target_text: str
    tokens: tuple[Token, ...]
    distributions: tuple[TokenDistribution, ...]
    template_id: str
    prefix_id: str | None = None

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.distributions):
            raise ValueError("tokens and distributions must have equal length")
        if not self.tokens:
            raise ValueError("a scored target holds at least one token")
        previous_end = 0
        for token in self.tokens:
            if token.start < previous_end or token.end <= token.start:
                raise ValueError(f"token spans must be ordered and non-empty, got {token}")
            if self.target_text[token.start : token.end] != token.text:
                raise ValueError(
                    f"span [{token.start},{token.end}) reads "
                    f"{self.target_text[token.start:token.end]!r}, token says {token.text!r}"
                )
            if self.target_text[previous_end : token.start].strip():
                raise ValueError("non-whitespace text between token spans")
            previous_end = token.end
        if self.target_text[previous_end:].strip():
            raise ValueError("non-whitespace text after the last token span")

    def __len__(self) -> int:
        return len(self.tokens)


def cross_entropy(scored: ScoredTarget, mean: bool = False) -> float:
    """Negative log-likelihood (nats) of the realized tokens, summed over positions.

    A realized token missing from a position's support is priced at that
    position's OTHER mass; probabilities are floored at ``PROB_FLOOR`` so
    the result is always finite.
    """
    total = 0.0
    for token, dist in zip(scored.tokens, scored.distributions):
        total -= math.log(max(dist.prob(token.text), PROB_FLOOR))
    return total / len(scored) if mean else total


class Scorer(ABC):
    """Teacher-forced scoring plus constrained generation."""

    @abstractmethod
    def score(
        self,
        input_text: str,
        target: TargetSequence,
        template_id: str,
        prefix_id: str | None = None,
    ) -> ScoredTarget:
        """Distribution for every token of ``target`` under teacher forcing."""

    @abstractmethod
    def generate(
        self,
        input_text: str,
        template_id: str,
        prefix_id: str | None = None,
        num_beams: int = 1,
    ) -> str:
        """Produce a target-formatted output string for ``input_text``."""


def _hash_bytes(*parts: object) -> bytes:
    joined = "\x1f".join(str(p) for p in parts).encode("utf8")
    return hashlib.blake2b(joined, digest_size=8).digest()


def _unit_hash(*parts: object) -> float:
    """Deterministic pseudo-uniform value in [0, 1) from the parts."""
    return int.from_bytes(_hash_bytes(*parts), "big") / 2.0**64


def _signed_hash(*parts: object) -> float:
    return 2.0 * _unit_hash(*parts) - 1.0


class ReferenceScorer(Scorer):
    """Deterministic model-free scorer for tests and offline runs.

    In the default ``trigram`` mode, each position's distribution comes from
    a smoothed character-trigram model estimated on the input and target
    text, perturbed by a per-template bias and seeded noise so that
    different templates genuinely disagree. In ``echo`` mode the
    distribution is a point mass on the realized token mixed with
    ``echo_noise`` of OTHER mass, which depends on nothing but the token
    itself.

    Generation is a seeded pseudo-extraction: quads are guessed from the
    input words independently of the template, occasionally perturbed per
    template, and rendered — enough to drive parse/vote/evaluate end to end
    without any model.
    """

    def __init__(
        self,
        seed: int = 0,
        mode: str = "trigram",
        top_m: int = 50,
        echo_noise: float = 0.0,
        bias_scale: float = 0.5,
        noise_scale: float = 0.25,
        perturb_rate: float = 0.3,
        smoothing: float = 1.0,
    ) -> None:
        if mode not in ("trigram", "echo"):
            raise ValueError(f"mode must be 'trigram' or 'echo', got {mode!r}")
        if not 0.0 <= echo_noise <= 1.0:
            raise ValueError("echo_noise must lie in [0, 1]")
        self.seed = seed
        self.mode = mode
        self.top_m = top_m
        self.echo_noise = echo_noise
        self.bias_scale = bias_scale
        self.noise_scale = noise_scale
        self.perturb_rate = perturb_rate
        self.smoothing = smoothing

    # -- scoring ---------------------------------------------------------

    def score(
        self,
        input_text: str,
        target: TargetSequence,
        template_id: str,
        prefix_id: str | None = None,
    ) -> ScoredTarget:
        tokens = tokenize(target.text)
        if not tokens:
            raise ValueError("cannot score an empty target")
        if self.mode == "echo":
            distributions = tuple(self._echo_distribution(t.text) for t in tokens)
        else:
            distributions = self._trigram_distributions(input_text, target.text, tokens, template_id)
        return ScoredTarget(
            target_text=target.text,
            tokens=tokens,
            distributions=distributions,
            template_id=template_id,
            prefix_id=prefix_id,
        )

    def _echo_distribution(self, token_text: str) -> TokenDistribution:
        return TokenDistribution(
            support=((token_text, 1.0 - self.echo_noise),),
            other_mass=self.echo_noise,
        )

    def _trigram_distributions(
        self,
        input_text: str,
        target_text: str,
        tokens: tuple[Token, ...],
        template_id: str,
    ) -> tuple[TokenDistribution, ...]:
        corpus = input_text + "\n" + target_text
        counts: dict[tuple[str, str], dict[str, int]] = defaultdict(lambda: defaultdict(int))
        padded = "\x02\x02" + corpus
        for i in range(len(corpus)):
            counts[(padded[i], padded[i + 1])][padded[i + 2]] += 1
        totals = {key: sum(row.values()) for key, row in counts.items()}
        charset_size = len(set(padded))
        denominator_floor = self.smoothing * charset_size

        def trigram_logprob(word: str, context: tuple[str, str]) -> float:
            a, b = context
            logp = 0.0
            for ch in word:
                row = counts.get((a, b))
                seen = row.get(ch, 0) if row else 0
                total = totals.get((a, b), 0)
                logp += math.log((seen + self.smoothing) / (total + denominator_floor))
                a, b = b, ch
            return logp

        candidates: list[str] = []
        seen: set[str] = set()
        for token in tokens:
            if token.text not in seen:
                seen.add(token.text)
                candidates.append(token.text)
        for match in _TOKEN_RE.finditer(input_text):
            if match.group() not in seen:
                seen.add(match.group())
                candidates.append(match.group())

        biases = [self.bias_scale * _signed_hash("bias", template_id, c) for c in candidates]

        padded_target = "\x02\x02" + target_text
        distributions = []
        context_cache: dict[tuple[str, str], TokenDistribution] = {}
        for token in tokens:
            context = (padded_target[token.start], padded_target[token.start + 1])
            dist = context_cache.get(context)
            if dist is None:
                logits = [
                    trigram_logprob(c, context)
                    + bias
                    + self.noise_scale * _signed_hash("noise", self.seed, context, c)
                    for c, bias in zip(candidates, biases)
                ]
                peak = max(logits)
                weights = [math.exp(l - peak) for l in logits]
                total = sum(weights)
                probs = sorted(
                    ((c, w / total) for c, w in zip(candidates, weights)),
                    key=lambda item: (-item[1], item[0]),
                )
                top = probs[: self.top_m]
                other = max(0.0, 1.0 - sum(p for _, p in top))
                dist = TokenDistribution(support=tuple(top), other_mass=other)
                context_cache[context] = dist
            distributions.append(dist)
        return tuple(distributions)

    # -- generation ------------------------------------------------------

    def generate(
        self,
        input_text: str,
        template_id: str,
        prefix_id: str | None = None,
        num_beams: int = 1,
    ) -> str:
        if num_beams < 1:
            raise ValueError("num_beams must be >= 1")
        template = get_template(template_id)
        quads = [self._perturb(q, template_id, input_text) for q in self._base_quads(input_text)]
        return render(quads, template).text

    def _base_quads(self, input_text: str) -> list[SurfaceQuad]:
        words = re.findall(r"[A-Za-z_]\w*", input_text)
        if not words:
            words = ["it"]
        rng = random.Random(int.from_bytes(_hash_bytes("gen", self.seed, input_text), "big"))
        count = 2 if len(words) >= 8 and rng.random() < 0.25 else 1
        quads = []
        for _ in range(count):
            quads.append(
                SurfaceQuad(
                    x_at="it" if rng.random() < 0.15 else rng.choice(words),
                    x_ot=rng.choice(words),
                    x_ac=rng.choice(words).lower(),
                    x_sp=rng.choice(["great", "ok", "bad"]),
                )
            )
        return quads

    def _perturb(self, quad: SurfaceQuad, template_id: str, input_text: str) -> SurfaceQuad:
        rng = random.Random(
            int.from_bytes(_hash_bytes("perturb", self.seed, template_id, input_text), "big")
        )
        if rng.random() >= self.perturb_rate:
            return quad
        if rng.random() < 0.5:
            flipped = rng.choice([s for s in ("great", "ok", "bad") if s != quad.x_sp])
            return SurfaceQuad(quad.x_at, quad.x_ot, quad.x_ac, flipped)
        return SurfaceQuad(quad.x_at, quad.x_ot + " really", quad.x_ac, quad.x_sp)


def plain_target(text: str) -> TargetSequence:
    """Wrap raw generated text so it can be scored (no element spans)."""
    return TargetSequence(text=text, element_spans=(), separator_spans=())


__all__ = [
    "PROB_FLOOR",
    "Token",
    "TokenDistribution",
    "ScoredTarget",
    "Scorer",
    "ReferenceScorer",
    "cross_entropy",
    "tokenize",
    "plain_target",
]
