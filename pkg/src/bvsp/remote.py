"""HTTP client for an external scoring service.

The service exposes three JSON endpoints:

* ``POST /score``    — teacher-forced distributions for a target sequence
* ``POST /generate`` — constrained generation for an input sentence
* ``GET /health``    — liveness and model metadata

Responses are validated against the same invariants the in-process types
enforce; a response that fails them raises :class:`ProtocolViolation`
rather than being silently repaired.
"""

from __future__ import annotations

import requests

from .errors import ProtocolViolation, ScorerUnavailable
from .scoring import ScoredTarget, Scorer, Token, TokenDistribution
from .templates import TargetSequence

DEFAULT_TIMEOUT_MS = 10_000


class RemoteScorer(Scorer):
    """Relay scoring and generation to a sidecar over HTTP.

    Args:
        endpoint: base URL of the service, e.g. ``http://localhost:8732``.
        timeout_ms: per-request timeout.
        top_m: number of support entries requested per position.
        renormalize: repair mildly unnormalized distributions instead of
            rejecting them. Off by default; protocol violations should be
            visible, not papered over.
    """

    def __init__(
        self,
        endpoint: str,
        timeout_ms: int = DEFAULT_TIMEOUT_MS,
        top_m: int = 50,
        renormalize: bool = False,
        session: requests.Session | None = None,
    ) -> None:
        self.endpoint = endpoint.rstrip("/")
        self.timeout_ms = timeout_ms
        self.top_m = top_m
        self.renormalize = renormalize
        # A session keeps a connection pool; safe for concurrent use.
        self._session = session or requests.Session()

    def _post(self, path: str, payload: dict) -> dict:
        try:
            response = self._session.post(
                self.endpoint + path, json=payload, timeout=self.timeout_ms / 1000.0
            )
        except requests.RequestException as exc:
            raise ScorerUnavailable(f"POST {path} failed: {exc}") from exc
        if response.status_code != 200:
            raise ScorerUnavailable(
                f"POST {path} returned HTTP {response.status_code}: {response.text[:200]}"
            )
        try:
            return response.json()
        except ValueError as exc:
            raise ProtocolViolation(f"POST {path} returned non-JSON body") from exc

    def score(
        self,
        input_text: str,
        target: TargetSequence,
        template_id: str,
        prefix_id: str | None = None,
    ) -> ScoredTarget:
        payload = {
            "input_text": input_text,
            "target_text": target.text,
            "template_id": template_id,
            "prefix_id": prefix_id,
            "top_m": self.top_m,
        }
        body = self._post("/score", payload)
        try:
            raw_tokens = body["tokens"]
            raw_dists = body["distributions"]
        except (TypeError, KeyError) as exc:
            raise ProtocolViolation(f"score response missing field: {exc}") from exc

        tokens = []
        for entry in raw_tokens:
            try:
                tokens.append(Token(text=entry["text"], start=int(entry["start"]), end=int(entry["end"])))
            except (TypeError, KeyError, ValueError) as exc:
                raise ProtocolViolation(f"bad token entry {entry!r}") from exc

        distributions = []
        for entry in raw_dists:
            try:
                support = tuple((str(k), float(p)) for k, p in entry["support"])
                other = float(entry.get("other_mass", 0.0))
            except (TypeError, KeyError, ValueError) as exc:
                raise ProtocolViolation(f"bad distribution entry: {exc}") from exc
            if self.renormalize:
                total = sum(p for _, p in support) + other
                if total > 0:
                    support = tuple((k, p / total) for k, p in support)
                    other = other / total
            try:
                distributions.append(TokenDistribution(support=support, other_mass=other))
            except ValueError as exc:
                raise ProtocolViolation(str(exc)) from exc

        try:
            return ScoredTarget(
                target_text=target.text,
                tokens=tuple(tokens),
                distributions=tuple(distributions),
                template_id=template_id,
                prefix_id=prefix_id,
            )
        except ValueError as exc:
            raise ProtocolViolation(str(exc)) from exc

    def generate(
        self,
        input_text: str,
        template_id: str,
        prefix_id: str | None = None,
        num_beams: int = 1,
    ) -> str:
        payload = {
            "input_text": input_text,
            "template_id": template_id,
            "prefix_id": prefix_id,
            "num_beams": num_beams,
        }
        body = self._post("/generate", payload)
        output = body.get("output_text") if isinstance(body, dict) else None
        if not isinstance(output, str):
            raise ProtocolViolation("generate response lacks string 'output_text'")
        return output

    def health(self) -> dict:
        try:
            response = self._session.get(self.endpoint + "/health", timeout=self.timeout_ms / 1000.0)
        except requests.RequestException as exc:
            raise ScorerUnavailable(f"GET /health failed: {exc}") from exc
        if response.status_code != 200:
            raise ScorerUnavailable(f"GET /health returned HTTP {response.status_code}")
        return response.json()
