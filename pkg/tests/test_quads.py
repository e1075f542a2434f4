from __future__ import annotations

import pickle

import pytest
from hypothesis import given, strategies as st

from bvsp.errors import UnknownPolaritySurface
from bvsp.quads import (
    IMPLICIT,
    Dataset,
    LabeledSentence,
    Polarity,
    SentimentQuad,
    SurfaceQuad,
    canonical_key,
    project,
    quads_equal,
    unproject,
)

words = st.text(alphabet="abcdefghij", min_size=1, max_size=6)
terms = st.one_of(st.just(IMPLICIT), words.filter(lambda w: w != "it"))
polarities = st.sampled_from(list(Polarity))


def quad_strategy():
    return st.builds(
        SentimentQuad,
        aspect_term=terms,
        opinion_term=terms,
        aspect_category=words,
        sentiment_polarity=polarities,
    )


class TestProjection:
    def test_explicit_example(self):
        q = SentimentQuad("room", "clean", "room_overall", Polarity.POS)
        s = project(q)
        assert (s.x_at, s.x_ot, s.x_ac, s.x_sp) == ("room", "clean", "room_overall", "great")

    def test_implicit_aspect_becomes_it(self):
        q = SentimentQuad(IMPLICIT, "loved", "hotel", Polarity.POS)
        assert project(q).x_at == "it"

    def test_neutral_becomes_ok(self):
        q = SentimentQuad("a", "o", "c", Polarity.NEU)
        assert project(q).x_sp == "ok"

    def test_polarity_image(self):
        surfaces = {project(SentimentQuad("a", "o", "c", p)).x_sp for p in Polarity}
        assert surfaces == {"great", "ok", "bad"}

    @given(quad_strategy())
    def test_roundtrip(self, quad):
        assert unproject(project(quad)) == quad

    def test_literal_it_roundtrips_via_flags(self):
        q = SentimentQuad("it", "o", "c", Polarity.POS)
        assert unproject(project(q)) == q  # flags disambiguate the literal word

    def test_parsed_it_maps_to_implicit(self):
        s = SurfaceQuad(x_at="it", x_ot="nice", x_ac="hotel", x_sp="great")
        assert unproject(s).aspect_term is IMPLICIT

    def test_bad_polarity_surface(self):
        s = SurfaceQuad(x_at="a", x_ot="b", x_ac="c", x_sp="great")
        object.__setattr__(s, "x_sp", "wonderful")
        with pytest.raises(UnknownPolaritySurface):
            unproject(s)

    def test_negative_maps_to_bad(self):
        s = SurfaceQuad(x_at="a", x_ot="b", x_ac="c", x_sp="bad")
        assert unproject(s).sentiment_polarity is Polarity.NEG


class TestValidation:
    def test_empty_category_rejected(self):
        with pytest.raises(ValueError):
            SentimentQuad("a", "b", "", Polarity.POS)

    def test_empty_term_rejected(self):
        with pytest.raises(ValueError):
            SentimentQuad("", "b", "c", Polarity.POS)

    def test_polarity_must_be_enum(self):
        with pytest.raises(ValueError):
            SentimentQuad("a", "b", "c", "positive")

    def test_surface_polarity_restricted(self):
        with pytest.raises(ValueError):
            SurfaceQuad(x_at="a", x_ot="b", x_ac="c", x_sp="fine")


class TestImplicitSentinel:
    def test_singleton(self):
        assert pickle.loads(pickle.dumps(IMPLICIT)) is IMPLICIT

    def test_distinct_from_strings(self):
        assert IMPLICIT != "NULL"
        assert IMPLICIT != "it"


class TestCanonicalEquality:
    def test_case_and_whitespace_insensitive(self):
        a = SentimentQuad("Room  Service", "Great", "Hotel", Polarity.POS)
        b = SentimentQuad("room service", "great", "hotel", Polarity.POS)
        assert quads_equal(a, b)

    def test_implicit_only_equals_implicit(self):
        a = SentimentQuad(IMPLICIT, "x", "c", Polarity.POS)
        b = SentimentQuad("null", "x", "c", Polarity.POS)
        assert not quads_equal(a, b)

    def test_polarity_distinguishes(self):
        a = SentimentQuad("a", "b", "c", Polarity.POS)
        b = SentimentQuad("a", "b", "c", Polarity.NEG)
        assert canonical_key(a) != canonical_key(b)


class TestContainers:
    def test_dataset_categories_union(self):
        s1 = LabeledSentence("1", "x", (SentimentQuad("a", "b", "food", Polarity.POS),))
        s2 = LabeledSentence(
            "2",
            "y",
            (
                SentimentQuad("a", "b", "decor", Polarity.NEG),
                SentimentQuad("a", "b", "food", Polarity.NEU),
            ),
        )
        ds = Dataset(name="d", sentences=(s1, s2))
        assert ds.categories == ("decor", "food")

    def test_quad_order_preserved(self):
        q1 = SentimentQuad("a", "b", "c", Polarity.POS)
        q2 = SentimentQuad("d", "e", "f", Polarity.NEG)
        s = LabeledSentence("1", "t", (q1, q2))
        assert s.quads == (q1, q2)
