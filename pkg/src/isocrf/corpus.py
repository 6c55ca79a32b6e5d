"""Conversation data model, JSONL corpus reader/writer and corpus-specific label adapters.

A corpus is a sequence of discussions, one JSON object per line::

    {"id": "d1", "turns": [{"id": "t1", "speaker": "alice", "reply_to": null,
      "units": [{"text": "So what?", "tokens": [{"form": "So", "pos": "RB"}, ...],
                 "deps": [{"rel": "dep", "head": 1, "dep": 0}],
                 "quotes": [[0, 2]], "label": "NN",
                 "ann": {"spans": [...], "turn_labels": [...], "iac_scores": [...]}}]}]}

Token indices in ``deps`` are 0-based positions in ``tokens``; ``quotes`` and
annotation spans are character offsets into the unit text.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator, Sequence


class CorpusError(ValueError):
    """Malformed corpus record. ``line`` is the 1-based line number, when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class StructuralError(CorpusError):
    """Well-formed JSON describing an impossible conversation (e.g. dangling reply_to)."""


class OrdinalLabel(enum.IntEnum):
    """Five-point (dis)agreement scale; the integer value is the position in the order."""

    NN = 0
    N = 1
    O = 2  # noqa: E741
    P = 3
    PP = 4

    @classmethod
    def parse(cls, name: str) -> "OrdinalLabel":
        try:
            return cls[name]
        except KeyError:
            raise ValueError(f"unknown label {name!r}; expected one of NN, N, O, P, PP") from None


LABELS: tuple[OrdinalLabel, ...] = tuple(OrdinalLabel)


@dataclass(frozen=True)
class Token:
    form: str
    pos: str = ""

    def __post_init__(self):
        if not self.form:
            raise ValueError("token form must be non-empty")


@dataclass(frozen=True)
class DependencyArc:
    relation: str
    head_index: int
    dependent_index: int

    def __post_init__(self):
        if self.head_index == self.dependent_index:
            raise ValueError(f"arc {self.relation} has head == dependent ({self.head_index})")


@dataclass(frozen=True)
class AnnotatedSpan:
    annotator: str
    polarity: int  # +1 agreement, -1 disagreement, 0 neutral
    start: int
    end: int


@dataclass(frozen=True)
class TurnAnnotation:
    annotator: str
    polarity: int


@dataclass(frozen=True)
class Annotation:
    """Raw per-annotator evidence a gold label can be derived from."""

    spans: tuple[AnnotatedSpan, ...] = ()
    turn_labels: tuple[TurnAnnotation, ...] = ()
    iac_scores: tuple[float, ...] = ()


@dataclass(frozen=True)
class TextUnit:
    text: str
    tokens: tuple[Token, ...] = ()
    arcs: tuple[DependencyArc, ...] = ()
    quote_spans: tuple[tuple[int, int], ...] = ()
    label: OrdinalLabel | None = None
    annotation: Annotation | None = None

    def __post_init__(self):
        n = len(self.tokens)
        for arc in self.arcs:
            if not (0 <= arc.head_index < n and 0 <= arc.dependent_index < n):
                raise ValueError(f"arc {arc.relation}({arc.head_index},{arc.dependent_index}) "
                                 f"outside token range 0..{n - 1}")
        for start, end in self.quote_spans:
            if not 0 <= start <= end <= len(self.text):
                raise ValueError(f"quote span [{start},{end}] outside text of length {len(self.text)}")

    @property
    def gold(self) -> OrdinalLabel | None:
        """Explicit label if given, otherwise one derived from the annotation record."""
        if self.label is not None:
            return self.label
        if self.annotation is None:
            return None
        if self.annotation.iac_scores:
            scores = self.annotation.iac_scores
            return map_iac_score(sum(scores) / len(scores))
        return map_aawd_labels(self)

    @property
    def forms(self) -> list[str]:
        return [t.form for t in self.tokens]


@dataclass(frozen=True)
class Turn:
    id: str
    speaker: str
    units: tuple[TextUnit, ...]
    reply_to: str | None = None

    def __post_init__(self):
        if not self.units:
            raise ValueError(f"turn {self.id!r} has no units")

    @property
    def text(self) -> str:
        return " ".join(u.text for u in self.units)


@dataclass(frozen=True)
class Discussion:
    id: str
    turns: tuple[Turn, ...] = field(default_factory=tuple)

    def __post_init__(self):
        seen: set[str] = set()
        for turn in self.turns:
            if turn.id in seen:
                raise StructuralError(f"discussion {self.id!r}: duplicate turn id {turn.id!r}")
            if turn.reply_to is not None and turn.reply_to not in seen:
                raise StructuralError(f"discussion {self.id!r}: turn {turn.id!r} replies to "
                                      f"{turn.reply_to!r}, which is not an earlier turn")
            seen.add(turn.id)

    def turn(self, turn_id: str) -> Turn:
        for t in self.turns:
            if t.id == turn_id:
                return t
        raise KeyError(turn_id)

    def target_of(self, turn: Turn) -> Turn | None:
        return self.turn(turn.reply_to) if turn.reply_to is not None else None

    @property
    def participants(self) -> set[str]:
        return {t.speaker for t in self.turns}


# --------------------------------------------------------------------------- parsing

_POLARITY = {
    "agree": 1, "agreement": 1, "positive": 1, "pos": 1, "+": 1, "1": 1,
    "disagree": -1, "disagreement": -1, "negative": -1, "neg": -1, "-": -1, "-1": -1,
    "neutral": 0, "none": 0, "0": 0,
}


def _polarity(value) -> int:
    key = str(value).strip().lower()
    if key not in _POLARITY:
        raise ValueError(f"unknown annotation polarity {value!r}")
    return _POLARITY[key]


def _unit_from_json(obj: dict) -> TextUnit:
    tokens = tuple(Token(t["form"], t.get("pos", "")) for t in obj.get("tokens", ()))
    arcs = tuple(DependencyArc(d["rel"], int(d["head"]), int(d["dep"])) for d in obj.get("deps", ()))
    quotes = tuple((int(s), int(e)) for s, e in obj.get("quotes", ()))
    label = obj.get("label")
    ann = obj.get("ann")
    annotation = None
    if ann is not None:
        annotation = Annotation(
            spans=tuple(AnnotatedSpan(str(s["annotator"]), _polarity(s["polarity"]),
                                      int(s["start"]), int(s["end"])) for s in ann.get("spans", ())),
            turn_labels=tuple(TurnAnnotation(str(t["annotator"]), _polarity(t["polarity"]))
                              for t in ann.get("turn_labels", ())),
            iac_scores=tuple(float(x) for x in ann.get("iac_scores", ())),
        )
    return TextUnit(
        text=obj["text"],
        tokens=tokens,
        arcs=arcs,
        quote_spans=quotes,
        label=OrdinalLabel.parse(label) if label is not None else None,
        annotation=annotation,
    )


def discussion_from_json(obj: dict) -> Discussion:
    turns = []
    for t in obj["turns"]:
        turns.append(Turn(
            id=str(t["id"]),
            speaker=str(t["speaker"]),
            reply_to=None if t.get("reply_to") is None else str(t["reply_to"]),
            units=tuple(_unit_from_json(u) for u in t["units"]),
        ))
    return Discussion(id=str(obj["id"]), turns=tuple(turns))


def iter_corpus(stream: Iterable[str]) -> Iterator[Discussion]:
    for lineno, line in enumerate(stream, start=1):
        if not line.strip():
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise CorpusError(f"malformed JSON: {exc.msg}", lineno) from exc
        try:
            yield discussion_from_json(obj)
        except StructuralError as exc:
            raise StructuralError(str(exc), lineno) from exc
        except (KeyError, TypeError, ValueError) as exc:
            detail = f"missing field {exc}" if isinstance(exc, KeyError) else str(exc)
            raise CorpusError(f"invalid record: {detail}", lineno) from exc


def parse_corpus(stream: Iterable[str]) -> list[Discussion]:
    """Read a JSONL corpus. Unknown fields are ignored; errors carry the line number."""
    return list(iter_corpus(stream))


def read_corpus(path) -> list[Discussion]:
    with open(path, encoding="utf-8") as fh:
        return parse_corpus(fh)


def _unit_to_json(unit: TextUnit) -> dict:
    obj: dict = {
        "text": unit.text,
        "tokens": [{"form": t.form, "pos": t.pos} for t in unit.tokens],
        "deps": [{"rel": a.relation, "head": a.head_index, "dep": a.dependent_index} for a in unit.arcs],
        "quotes": [list(q) for q in unit.quote_spans],
    }
    if unit.label is not None:
        obj["label"] = unit.label.name
    if unit.annotation is not None:
        a = unit.annotation
        obj["ann"] = {
            "spans": [{"annotator": s.annotator, "polarity": s.polarity, "start": s.start, "end": s.end}
                      for s in a.spans],
            "turn_labels": [{"annotator": t.annotator, "polarity": t.polarity} for t in a.turn_labels],
            "iac_scores": list(a.iac_scores),
        }
    return obj


def discussion_to_json(discussion: Discussion) -> dict:
    return {
        "id": discussion.id,
        "turns": [{"id": t.id, "speaker": t.speaker, "reply_to": t.reply_to,
                   "units": [_unit_to_json(u) for u in t.units]} for t in discussion.turns],
    }


def dump_corpus(discussions: Iterable[Discussion], stream: IO[str]) -> None:
    for d in discussions:
        stream.write(json.dumps(discussion_to_json(d), ensure_ascii=False, sort_keys=True))
        stream.write("\n")


# --------------------------------------------------------------------------- label adapters

def _span_annotators(unit: TextUnit) -> dict[int, set[str]]:
    """Annotators whose spans overlap the unit, keyed by polarity."""
    out: dict[int, set[str]] = {1: set(), -1: set(), 0: set()}
    if unit.annotation is None:
        return out
    length = len(unit.text)
    for span in unit.annotation.spans:
        if span.start < length and span.end > 0 and span.end > span.start:
            out[span.polarity].add(span.annotator)
    return out


def is_sentence_annotated(unit: TextUnit) -> bool:
    """True when at least one annotator marked a span on this unit (of any polarity)."""
    return any(_span_annotators(unit).values())


def is_turn_inherited(unit: TextUnit) -> bool:
    """True when the unit's agreement/disagreement label comes only from turn-level annotation."""
    if unit.annotation is None or is_sentence_annotated(unit):
        return False
    return map_aawd_labels(unit) is not OrdinalLabel.O


def map_aawd_labels(unit: TextUnit) -> OrdinalLabel:
    """Derive a 5-way label from AAWD-style span and turn annotations.

    Span evidence takes precedence; turn-level labels are inherited only by units
    nobody annotated at the sentence level, and then yield at most P/N.
    Units carrying both polarities are neutral.
    """
    spans = _span_annotators(unit)
    if any(spans.values()):
        pos, neg = len(spans[1]), len(spans[-1])
        if pos and neg:
            return OrdinalLabel.O
        if pos:
            return OrdinalLabel.PP if pos >= 2 else OrdinalLabel.P
        if neg:
            return OrdinalLabel.NN if neg >= 2 else OrdinalLabel.N
        return OrdinalLabel.O
    if unit.annotation is None:
        return OrdinalLabel.O
    polarities = {t.polarity for t in unit.annotation.turn_labels}
    if 1 in polarities and -1 in polarities:
        return OrdinalLabel.O
    if 1 in polarities:
        return OrdinalLabel.P
    if -1 in polarities:
        return OrdinalLabel.N
    return OrdinalLabel.O


def map_iac_score(mean_score: float) -> OrdinalLabel:
    """Bin a mean IAC agreement score in [-5, 5] onto the 5-way scale."""
    if not -5.0 <= mean_score <= 5.0:
        raise ValueError(f"IAC score {mean_score} outside [-5, 5]")
    if mean_score <= -3.0:
        return OrdinalLabel.NN
    if -3.0 < mean_score <= -1.0:
        return OrdinalLabel.N
    if 1.0 <= mean_score < 3.0:
        return OrdinalLabel.P
    if mean_score >= 3.0:
        return OrdinalLabel.PP
    return OrdinalLabel.O


def filter_discussions(corpus: Sequence[Discussion], min_participants: int = 5) -> list[Discussion]:
    return [d for d in corpus if len(d.participants) >= min_participants]
