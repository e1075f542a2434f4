from __future__ import annotations

import random

import pytest

from bvsp.quads import IMPLICIT, LabeledSentence, Polarity, SentimentQuad

# collected acceptance outcomes: nodeid -> "PASS" | "FAIL"
_ACCEPTANCE_RESULTS: dict[str, str] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance" in report.nodeid and report.when == "call":
        _ACCEPTANCE_RESULTS[report.nodeid.split("::")[-1]] = (
            "PASS" if report.passed else "FAIL"
        )


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in _ACCEPTANCE_RESULTS.items():
        terminalreporter.write_line(f"{outcome}  {name}")


WORDS = (
    "room", "pool", "staff", "breakfast", "wifi", "lobby", "view", "bed",
    "carpet", "menu", "clean", "friendly", "slow", "fresh", "noisy", "cozy",
    "stale", "warm", "bright", "dim",
)

CATEGORIES = ("room_overall", "service", "food", "internet", "decor", "price")


def random_quad(rng: random.Random, implicit_rate: float = 0.2) -> SentimentQuad:
    def term():
        if rng.random() < implicit_rate:
            return IMPLICIT
        return " ".join(rng.choices(WORDS, k=rng.randint(1, 2)))

    return SentimentQuad(
        aspect_term=term(),
        opinion_term=term(),
        aspect_category=rng.choice(CATEGORIES),
        sentiment_polarity=rng.choice(list(Polarity)),
    )


def random_sentence(rng: random.Random, sid: str, max_quads: int = 3) -> LabeledSentence:
    quads = tuple(random_quad(rng) for _ in range(rng.randint(1, max_quads)))
    text = " ".join(rng.choices(WORDS, k=rng.randint(4, 10))) + " ."
    return LabeledSentence(id=sid, text=text, quads=quads)


@pytest.fixture
def rng():
    return random.Random(20240817)
