"""Serialize components to tagged text and parse that text back.

The tagged form writes one segment per edge:

    <S> <H> nutrition <POS> <T> obesity <E>

The connector form is identical except that the polarity tag is replaced by
a single generic connector token, which deliberately withholds the causal
direction from the reader. Segments are joined by a configurable delimiter
(space-padded pipe by default; the empty string reproduces the undelimited
variant). The grammar lives in data/linearized_grammar.txt.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources

from .errors import LinearizationError, LinearizedParseError
from .graph import RESERVED_TOKENS, Component, Polarity

DEFAULT_CONNECTOR = "<CAUSES>"
DEFAULT_DELIMITER = " | "

_POLARITY_TOKEN = {Polarity.POSITIVE: "<POS>", Polarity.NEGATIVE: "<NEG>"}
_SEGMENT_RE = re.compile(r"^(?P<head>.+) (?P<relation>\S+) <T> (?P<tail>.+)$")


def grammar_text() -> str:
    """Return the grammar reference shipped with the package."""
    return resources.files("causaltext.data").joinpath("linearized_grammar.txt").read_text()


def _validate_connector(connector: str) -> None:
    if not connector or any(ch.isspace() for ch in connector):
        raise LinearizationError(
            f"connector must be a single non-empty token (got {connector!r})",
            code="bad-connector",
        )
    if connector in RESERVED_TOKENS:
        raise LinearizationError(
            f"connector must not be a reserved tag (got {connector!r})", code="bad-connector"
        )


@dataclass(frozen=True)
class LinearizationMode:
    """Tagged mode when connector is None, connector mode otherwise."""

    connector: str | None = None

    def __post_init__(self):
        if self.connector is not None:
            _validate_connector(self.connector)

    @property
    def is_tagged(self) -> bool:
        return self.connector is None

    def relation_token(self, polarity: Polarity) -> str:
        if self.connector is None:
            return _POLARITY_TOKEN[polarity]
        return self.connector


TAGS = LinearizationMode()


def no_tags(connector: str = DEFAULT_CONNECTOR) -> LinearizationMode:
    return LinearizationMode(connector=connector)


@dataclass(frozen=True)
class LinearizedText:
    text: str
    mode: LinearizationMode
    edge_count: int


def linearize(
    component: Component,
    mode: LinearizationMode = TAGS,
    *,
    delimiter: str = DEFAULT_DELIMITER,
) -> LinearizedText:
    """Emit the text form of a component, one segment per edge in order."""
    if not component.edges:
        raise LinearizationError("cannot linearize an empty component", code="empty-component")
    segments = []
    for src_label, polarity, tgt_label in component.labeled_edges():
        for label in (src_label, tgt_label):
            if any(token in label for token in RESERVED_TOKENS) or "|" in label:
                raise LinearizationError(
                    f"label contains a reserved token: {label!r}", code="label-reserved-token"
                )
            if mode.connector is not None and mode.connector in label:
                raise LinearizationError(
                    f"label contains the connector token: {label!r}", code="label-reserved-token"
                )
        segments.append(f"<H> {src_label} {mode.relation_token(polarity)} <T> {tgt_label}")
    text = f"<S> {delimiter.join(segments)} <E>"
    return LinearizedText(text=text, mode=mode, edge_count=len(component.edges))


def strip_polarity(
    linearized: LinearizedText, connector: str = DEFAULT_CONNECTOR
) -> LinearizedText:
    """Replace every polarity tag with the connector token.

    Labels cannot contain reserved tags, so plain substring replacement only
    ever touches relation positions. Token count is preserved exactly.
    """
    if not linearized.mode.is_tagged:
        raise LinearizationError("input is already in connector form", code="already-notags")
    _validate_connector(connector)
    text = linearized.text.replace("<POS>", connector).replace("<NEG>", connector)
    return LinearizedText(text=text, mode=no_tags(connector), edge_count=linearized.edge_count)


def parse_linearized(text: str) -> tuple[Component, LinearizationMode]:
    """Parse linearized text back into a component and its detected mode.

    Node ids are regenerated from labels. The connector form does not encode
    polarity, so parsed edges default to positive there; the tagged form
    round-trips exactly.
    """
    stripped = text.strip()
    if not stripped.startswith("<S> "):
        raise LinearizedParseError("text does not start with <S>", code="missing-start")
    if not stripped.endswith(" <E>"):
        raise LinearizedParseError("text does not end with <E>", code="missing-end")
    body = stripped[len("<S> ") : -len(" <E>")]
    pieces = body.split("<H> ")
    if pieces[0].strip(" |") != "":
        raise LinearizedParseError(
            f"unexpected text before first segment: {pieces[0]!r}", code="bad-segment"
        )
    raw_segments = pieces[1:]
    if not raw_segments:
        raise LinearizedParseError("no segments found", code="bad-segment")
    relations: list[str] = []
    labeled: list[tuple[str, str, str]] = []
    for index, raw in enumerate(raw_segments):
        # Trim the trailing delimiter this segment carries, if any: either a
        # space-padded pipe or the bare space left by the undelimited form.
        segment = re.sub(r"\s*\|\s*$", "", raw).rstrip()
        match = _SEGMENT_RE.match(segment)
        if match is None:
            raise LinearizedParseError(
                f"segment {index}: missing head, relation or tail in {segment!r}",
                code="bad-segment",
            )
        head = match.group("head").strip()
        tail = match.group("tail").strip()
        if not head or not tail:
            raise LinearizedParseError(
                f"segment {index}: empty head or tail label", code="bad-segment"
            )
        labeled.append((head, match.group("relation"), tail))
        relations.append(match.group("relation"))
    mode = _detect_mode(relations)
    edges = []
    for head, relation, tail in labeled:
        if mode.is_tagged:
            polarity = Polarity.POSITIVE if relation == "<POS>" else Polarity.NEGATIVE
        else:
            polarity = Polarity.POSITIVE
        edges.append((head, polarity, tail))
    return Component.from_labeled_edges(edges), mode


def _detect_mode(relations: list[str]) -> LinearizationMode:
    tagged = {token for token in relations if token in ("<POS>", "<NEG>")}
    others = {token for token in relations if token not in ("<POS>", "<NEG>")}
    if others and tagged:
        raise LinearizedParseError(
            f"mixed relation tokens: {sorted(tagged | others)}", code="bad-relation"
        )
    if not others:
        return TAGS
    if len(others) > 1:
        raise LinearizedParseError(
            f"inconsistent connector tokens: {sorted(others)}", code="bad-relation"
        )
    connector = next(iter(others))
    if connector in RESERVED_TOKENS:
        raise LinearizedParseError(
            f"unknown polarity token {connector!r}", code="bad-relation"
        )
    try:
        return no_tags(connector)
    except LinearizationError as exc:
        raise LinearizedParseError(str(exc), code="bad-relation") from exc
