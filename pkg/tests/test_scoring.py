from __future__ import annotations

import math
import random

import pytest

from bvsp.quads import SurfaceQuad
from bvsp.scoring import (
    PROB_FLOOR,
    ReferenceScorer,
    ScoredTarget,
    Token,
    TokenDistribution,
    cross_entropy,
    plain_target,
    tokenize,
)
from bvsp.templates import get_template, parse, render

SAMPLE = SurfaceQuad(x_at="room", x_ot="clean", x_ac="room_overall", x_sp="great")


def sample_target(template_id="paraphrase"):
    return render([SAMPLE], get_template(template_id))


class TestTokenize:
    def test_markers_are_single_tokens(self):
        texts = [t.text for t in tokenize("[AT] room [SSEP] nice, stay.")]
        assert texts == ["[AT]", "room", "[SSEP]", "nice", ",", "stay", "."]

    def test_spans_match_text(self):
        text = "(room, room_overall, great, clean)"
        for token in tokenize(text):
            assert text[token.start : token.end] == token.text


class TestTokenDistribution:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            TokenDistribution(support=(("a", -0.1),), other_mass=1.1)

    def test_rejects_bad_sum(self):
        with pytest.raises(ValueError):
            TokenDistribution(support=(("a", 0.4),), other_mass=0.4)

    def test_rejects_duplicate_keys(self):
        with pytest.raises(ValueError):
            TokenDistribution(support=(("a", 0.5), ("a", 0.5)))

    def test_prob_falls_back_to_other(self):
        dist = TokenDistribution(support=(("a", 0.7),), other_mass=0.3)
        assert dist.prob("a") == 0.7
        assert dist.prob("zzz") == 0.3

    def test_entropy_point_mass_zero(self):
        assert TokenDistribution(support=(("a", 1.0),)).entropy() == 0.0


class TestScoredTargetInvariants:
    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            ScoredTarget(
                target_text="a",
                tokens=(Token("a", 0, 1),),
                distributions=(),
                template_id="gas",
            )

    def test_span_text_mismatch(self):
        with pytest.raises(ValueError):
            ScoredTarget(
                target_text="ab",
                tokens=(Token("b", 0, 1),),
                distributions=(TokenDistribution((("b", 1.0),)),),
                template_id="gas",
            )

    def test_gap_must_be_whitespace(self):
        with pytest.raises(ValueError):
            ScoredTarget(
                target_text="a b",
                tokens=(Token("b", 2, 3),),
                distributions=(TokenDistribution((("b", 1.0),)),),
                template_id="gas",
            )


class TestReferenceScorer:
    def test_distributions_normalized(self):
        scorer = ReferenceScorer(seed=3)
        scored = scorer.score("The room is clean.", sample_target(), "paraphrase")
        for dist in scored.distributions:
            total = sum(p for _, p in dist.support) + dist.other_mass
            assert abs(total - 1.0) <= 1e-6

    def test_deterministic_across_calls(self):
        target = sample_target()
        a = ReferenceScorer(seed=9).score("x y", target, "paraphrase")
        b = ReferenceScorer(seed=9).score("x y", target, "paraphrase")
        assert a == b

    def test_seed_changes_distributions(self):
        target = sample_target()
        a = ReferenceScorer(seed=1).score("x", target, "paraphrase")
        b = ReferenceScorer(seed=2).score("x", target, "paraphrase")
        assert a != b

    def test_template_bias_changes_distributions(self):
        target = sample_target()
        scorer = ReferenceScorer(seed=1)
        a = scorer.score("x", target, "paraphrase")
        b = scorer.score("x", target, "gas")
        assert a.distributions != b.distributions

    def test_echo_mode_point_mass(self):
        scorer = ReferenceScorer(seed=1, mode="echo")
        scored = scorer.score("x", sample_target(), "paraphrase")
        for token, dist in zip(scored.tokens, scored.distributions):
            assert dist.support == ((token.text, 1.0),)
            assert dist.other_mass == 0.0

    def test_echo_mode_depends_only_on_token(self):
        scorer = ReferenceScorer(seed=1, mode="echo", echo_noise=0.2)
        a = scorer.score("x", sample_target("paraphrase"), "paraphrase")
        b = scorer.score("x", sample_target("marker_AT_OT_AC_SP"), "marker_AT_OT_AC_SP")
        dist_a = {t.text: d for t, d in zip(a.tokens, a.distributions)}
        dist_b = {t.text: d for t, d in zip(b.tokens, b.distributions)}
        for token in ("room", "clean", "room_overall", "great"):
            assert dist_a[token] == dist_b[token]

    def test_generation_parses_under_its_template(self):
        scorer = ReferenceScorer(seed=7)
        for template_id in ("gas", "paraphrase", "marker_SP_AC_OT_AT"):
            text = scorer.generate("The pool looked murky in the morning.", template_id)
            result = parse(text, get_template(template_id))
            assert result.malformed_count == 0
            assert len(result.quads) >= 1

    def test_generation_deterministic(self):
        scorer = ReferenceScorer(seed=7)
        a = scorer.generate("Staff were friendly.", "gas")
        b = scorer.generate("Staff were friendly.", "gas")
        assert a == b

    def test_generation_rejects_zero_beams(self):
        with pytest.raises(ValueError):
            ReferenceScorer(seed=0).generate("x", "gas", num_beams=0)

    def test_top_m_truncates_support(self):
        scorer = ReferenceScorer(seed=0, top_m=3)
        scored = scorer.score("alpha beta gamma delta", sample_target(), "paraphrase")
        for dist in scored.distributions:
            assert len(dist.support) <= 3


class TestCrossEntropy:
    def test_perfect_prediction_is_zero(self):
        tokens = tokenize("a b")
        dists = tuple(TokenDistribution(((t.text, 1.0),)) for t in tokens)
        scored = ScoredTarget("a b", tokens, dists, template_id="gas")
        assert cross_entropy(scored) == 0.0

    def test_half_probabilities_closed_form(self):
        tokens = tokenize("a b")
        dists = tuple(TokenDistribution(((t.text, 0.5), ("z", 0.5))) for t in tokens)
        scored = ScoredTarget("a b", tokens, dists, template_id="gas")
        assert cross_entropy(scored) == pytest.approx(2 * math.log(2), abs=1e-12)
        assert cross_entropy(scored, mean=True) == pytest.approx(math.log(2), abs=1e-12)

    def test_missing_token_priced_at_other_mass(self):
        tokens = tokenize("a")
        dists = (TokenDistribution((("b", 0.75),), other_mass=0.25),)
        scored = ScoredTarget("a", tokens, dists, template_id="gas")
        assert cross_entropy(scored) == pytest.approx(-math.log(0.25), abs=1e-12)

    def test_zero_probability_floored(self):
        tokens = tokenize("a")
        dists = (TokenDistribution((("b", 1.0),), other_mass=0.0),)
        scored = ScoredTarget("a", tokens, dists, template_id="gas")
        assert cross_entropy(scored) == pytest.approx(-math.log(PROB_FLOOR), abs=1e-9)

    def test_matches_direct_summation_oracle(self, rng):
        # Independent oracle: explicit per-position -log p accumulation.
        for _ in range(50):
            words = [f"w{i}" for i in range(rng.randint(1, 6))]
            text = " ".join(words)
            tokens = tokenize(text)
            dists = []
            for _ in tokens:
                raw = [rng.random() for _ in range(3)]
                total = sum(raw) * (1 + rng.random())
                support = tuple((w, p / total) for w, p in zip(["w0", "w1", "w2"], raw))
                dists.append(
                    TokenDistribution(support, other_mass=1 - sum(p for _, p in support))
                )
            scored = ScoredTarget(text, tokens, tuple(dists), template_id="gas")

            expected = 0.0
            for token, dist in zip(tokens, dists):
                table = dict(dist.support)
                p = table[token.text] if token.text in table else dist.other_mass
                expected += -math.log(max(p, 1e-12))
            assert cross_entropy(scored) == pytest.approx(expected, abs=1e-12)

    def test_nonnegative(self, rng):
        scorer = ReferenceScorer(seed=4)
        scored = scorer.score("some input", sample_target(), "paraphrase")
        assert cross_entropy(scored) >= 0.0


class TestPlainTarget:
    def test_wraps_text(self):
        target = plain_target("free text")
        assert target.text == "free text"
        assert target.element_spans == ()
