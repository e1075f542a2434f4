"""The 26-template registry and reversible rendering of quads to target text.

Three template styles exist:

* tuple style (id ``gas``): ``(x_at, x_ac, x_sp, x_ot)``
* paraphrase style (id ``paraphrase``): ``x_ac is x_sp because x_at is x_ot``
* marker style (ids ``marker_<order>``): ``[AT] value [AC] value ...`` for
  every permutation of the four element markers, 24 templates.

A sentence with several quads renders one clause per quad, clauses joined by
``" [SSEP] "``. Rendering records the character span of every element value
so scoring can later isolate element positions from linking symbols; parsing
is the exact inverse on rendered output and degrades gracefully (by dropping
and counting malformed clauses) on arbitrary model output.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from enum import Enum

from .errors import MarkerCollision
from .quads import SurfaceQuad

SSEP = "[SSEP]"
SSEP_JOIN = " [SSEP] "


class Role(Enum):
    """The four quad elements."""

    AT = "AT"
    OT = "OT"
    AC = "AC"
    SP = "SP"


MARKERS = {role: f"[{role.value}]" for role in Role}

_SURFACE_ATTR = {Role.AT: "x_at", Role.OT: "x_ot", Role.AC: "x_ac", Role.SP: "x_sp"}

# Fixed element orders for the two non-marker styles.
_GAS_ORDER = (Role.AT, Role.AC, Role.SP, Role.OT)
_PARAPHRASE_ORDER = (Role.AC, Role.SP, Role.AT, Role.OT)


class TemplateKind(Enum):
    TUPLE = "tuple"
    PARAPHRASE = "paraphrase"
    MARKER = "marker"


@dataclass(frozen=True)
class Template:
    id: str
    kind: TemplateKind
    element_order: tuple[Role, Role, Role, Role]
    linking_literals: tuple[str, ...]


@dataclass(frozen=True)
class ElementSpan:
    quad_index: int
    role: Role
    start: int
    end: int


@dataclass(frozen=True)
class TargetSequence:
    """Rendered target text plus the location of every element value in it."""

    text: str
    element_spans: tuple[ElementSpan, ...]
    separator_spans: tuple[tuple[int, int], ...] = ()

    def slice(self, span: ElementSpan) -> str:
        return self.text[span.start : span.end]


@dataclass(frozen=True)
class ParseResult:
    """Quads recovered from a target string plus the number of dropped clauses."""

    quads: tuple[SurfaceQuad, ...]
    malformed_count: int


def _build_registry() -> dict[str, Template]:
    registry: dict[str, Template] = {}
    registry["gas"] = Template(
        id="gas",
        kind=TemplateKind.TUPLE,
        element_order=_GAS_ORDER,
        linking_literals=("(", ", ", ")"),
    )
    registry["paraphrase"] = Template(
        id="paraphrase",
        kind=TemplateKind.PARAPHRASE,
        element_order=_PARAPHRASE_ORDER,
        linking_literals=(" is ", " because "),
    )
    # All 4! marker orders, in lexicographic order of the role symbols.
    for order in itertools.permutations(sorted(Role, key=lambda r: r.value)):
        tid = "marker_" + "_".join(r.value for r in order)
        registry[tid] = Template(
            id=tid,
            kind=TemplateKind.MARKER,
            element_order=order,
            linking_literals=tuple(MARKERS[r] for r in order),
        )
    return registry


_REGISTRY = _build_registry()


def list_templates() -> list[Template]:
    """All 26 templates: gas, paraphrase, then the marker permutations."""
    return list(_REGISTRY.values())


def get_template(template_id: str) -> Template:
    try:
        return _REGISTRY[template_id]
    except KeyError:
        raise KeyError(f"unknown template id {template_id!r}") from None


def _check_collisions(quad: SurfaceQuad, template: Template) -> None:
    literals = template.linking_literals + (SSEP,)
    for value in quad.fields():
        for literal in literals:
            if literal in value:
                raise MarkerCollision(
                    f"field {value!r} contains reserved literal {literal!r} "
                    f"of template {template.id}"
                )


def _clause_pieces(quad: SurfaceQuad, template: Template) -> list[str | tuple[Role, str]]:
    """Clause as a sequence of literal strings and (role, value) fields."""
    values = {role: getattr(quad, _SURFACE_ATTR[role]) for role in Role}
    if template.kind is TemplateKind.TUPLE:
        pieces: list[str | tuple[Role, str]] = ["("]
        for i, role in enumerate(template.element_order):
            if i:
                pieces.append(", ")
            pieces.append((role, values[role]))
        pieces.append(")")
        return pieces
    if template.kind is TemplateKind.PARAPHRASE:
        ac, sp, at, ot = (values[r] for r in _PARAPHRASE_ORDER)
        return [(Role.AC, ac), " is ", (Role.SP, sp), " because ", (Role.AT, at), " is ", (Role.OT, ot)]
    pieces = []
    for i, role in enumerate(template.element_order):
        if i:
            pieces.append(" ")
        pieces.append(MARKERS[role])
        pieces.append(" ")
        pieces.append((role, values[role]))
    return pieces


def render(quads: list[SurfaceQuad] | tuple[SurfaceQuad, ...], template: Template) -> TargetSequence:
    """Render quads into a single target sequence, one clause per quad.

    Raises:
        MarkerCollision: if any field contains one of the template's linking
            literals or the reserved separator.
    """
    if not quads:
        raise ValueError("render requires at least one quad")
    for quad in quads:
        _check_collisions(quad, template)

    parts: list[str] = []
    spans: list[ElementSpan] = []
    separators: list[tuple[int, int]] = []
    offset = 0
    for quad_index, quad in enumerate(quads):
        if quad_index:
            start = offset + 1  # skip the leading space of " [SSEP] "
            separators.append((start, start + len(SSEP)))
            parts.append(SSEP_JOIN)
            offset += len(SSEP_JOIN)
        for piece in _clause_pieces(quad, template):
            if isinstance(piece, str):
                parts.append(piece)
                offset += len(piece)
            else:
                role, value = piece
                spans.append(ElementSpan(quad_index, role, offset, offset + len(value)))
                parts.append(value)
                offset += len(value)
    return TargetSequence(text="".join(parts), element_spans=tuple(spans), separator_spans=tuple(separators))


def _parse_tuple(clause: str, template: Template) -> SurfaceQuad | None:
    s = clause.strip()
    if not (s.startswith("(") and s.endswith(")")) or len(s) < 2:
        return None
    parts = s[1:-1].split(", ", 3)
    if len(parts) != 4:
        return None
    return _quad_from_parts(template.element_order, parts)


def _parse_paraphrase(clause: str, template: Template) -> SurfaceQuad | None:
    halves = clause.strip().split(" because ", 1)
    if len(halves) != 2:
        return None
    left = halves[0].split(" is ", 1)
    right = halves[1].split(" is ", 1)
    if len(left) != 2 or len(right) != 2:
        return None
    return _quad_from_parts(_PARAPHRASE_ORDER, [left[0], left[1], right[0], right[1]])


_MARKER_CLAUSE_RE: dict[str, re.Pattern[str]] = {}


def _marker_pattern(template: Template) -> re.Pattern[str]:
    pattern = _MARKER_CLAUSE_RE.get(template.id)
    if pattern is None:
        body = r"\s*".join(
            re.escape(MARKERS[role]) + r"\s*(.*?)" for role in template.element_order
        )
        pattern = re.compile(r"^\s*" + body + r"\s*$")
        _MARKER_CLAUSE_RE[template.id] = pattern
    return pattern


def _parse_marker(clause: str, template: Template) -> SurfaceQuad | None:
    match = _marker_pattern(template).match(clause)
    if match is None:
        return None
    return _quad_from_parts(template.element_order, list(match.groups()))


def _quad_from_parts(order: tuple[Role, ...], parts: list[str]) -> SurfaceQuad | None:
    values: dict[Role, str] = {}
    for role, raw in zip(order, parts):
        value = raw.strip()
        if not value:
            return None
        values[role] = value
    sp = values[Role.SP].lower()
    if sp not in ("great", "ok", "bad"):
        return None
    return SurfaceQuad(x_at=values[Role.AT], x_ot=values[Role.OT], x_ac=values[Role.AC], x_sp=sp)


_CLAUSE_PARSERS = {
    TemplateKind.TUPLE: _parse_tuple,
    TemplateKind.PARAPHRASE: _parse_paraphrase,
    TemplateKind.MARKER: _parse_marker,
}


def parse(text: str, template: Template) -> ParseResult:
    """Recover quads from a target string; never raises on content.

    Splits on the clause separator, matches each clause greedily
    left-to-right against the template grammar, and drops (while counting)
    clauses that do not fit.
    """
    parser = _CLAUSE_PARSERS[template.kind]
    quads: list[SurfaceQuad] = []
    malformed = 0
    for clause in text.split(SSEP):
        quad = parser(clause, template)
        if quad is None:
            malformed += 1
        else:
            quads.append(quad)
    return ParseResult(quads=tuple(quads), malformed_count=malformed)


def example_rendering(template: Template) -> str:
    """A one-quad sample rendering used by the registry dump."""
    sample = SurfaceQuad(x_at="room", x_ot="clean", x_ac="room_overall", x_sp="great")
    return render([sample], template).text
