"""Sparse indicator features for text units.

Feature names are namespaced by family: ``lex:``, ``disc:``, ``syn:``, ``conv:``
and ``sent:``. Numeric quantities (word counts, negator counts, quote overlap,
TF-IDF similarity with the target turn) are standardized with statistics frozen
on the training data and one-hot encoded into five bins.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from ._text import (
    GENERAL_REL,
    ConfigError,
    find_phrases,
    is_word,
    norm,
    placeholder,
    read_wordlist,
    rel_surface,
    words,
)
from .corpus import Discussion, TextUnit, Turn
from .isotonic import Lexicon, read_lexicon

FAMILIES = ("lex", "disc", "syn", "conv", "sent")
FAMILY_NAMES = {"lexical": "lex", "discourse": "disc", "syntactic": "syn", "semantic": "syn",
                "conversation": "conv", "sentiment": "sent"}

# Small built-in lists used when no resource file is supplied.
DEFAULT_NEGATORS = ("not", "no", "never", "n't", "nothing", "nobody", "none", "neither", "nor",
                    "cannot", "without")
DEFAULT_HEDGES = ("may", "might", "could", "perhaps", "possibly", "probably", "seems", "seem",
                  "suggest", "suggests", "suggestion", "appear", "appears", "likely", "should",
                  "i think", "i believe", "sort of", "kind of")
DEFAULT_CONNECTIVES = ("but", "however", "although", "though", "because", "so", "and", "yet",
                       "while", "whereas", "therefore", "also", "instead", "still", "besides",
                       "on the other hand", "in contrast", "as a result")

_REPEATED_PUNCT = re.compile(r"([^\w\s])\1+")


def parse_families(spec: str | Iterable[str]) -> frozenset[str]:
    items = spec.split(",") if isinstance(spec, str) else list(spec)
    out = set()
    for item in items:
        key = item.strip().lower()
        if not key:
            continue
        fam = key if key in FAMILIES else FAMILY_NAMES.get(key)
        if fam is None:
            raise ConfigError(f"unknown feature family {item!r}; choose from {', '.join(FAMILIES)}")
        out.add(fam)
    return frozenset(out)


@dataclass(frozen=True)
class FeatureGroupConfig:
    families: frozenset[str] = frozenset(FAMILIES)
    hedges: tuple[tuple[str, ...], ...] = tuple(tuple(h.split()) for h in DEFAULT_HEDGES)
    negators: frozenset[str] = frozenset(DEFAULT_NEGATORS)
    connectives: tuple[tuple[str, ...], ...] = tuple(tuple(c.split()) for c in DEFAULT_CONNECTIVES)
    lexicon: Lexicon | None = None
    connective_window: int = 3

    def __post_init__(self):
        unknown = set(self.families) - set(FAMILIES)
        if unknown:
            raise ConfigError(f"unknown feature families {sorted(unknown)}")
        if "sent" in self.families and self.lexicon is None:
            raise ConfigError("the sentiment feature family needs a sentiment lexicon")

    @classmethod
    def from_paths(cls, families=FAMILIES, hedges=None, negators=None, connectives=None,
                   lexicon=None, connective_window: int = 3) -> "FeatureGroupConfig":
        kwargs = {}
        if hedges is not None:
            kwargs["hedges"] = read_wordlist(hedges)
        if negators is not None:
            kwargs["negators"] = frozenset(" ".join(e) for e in read_wordlist(negators))
        if connectives is not None:
            kwargs["connectives"] = read_wordlist(connectives)
        if isinstance(lexicon, Lexicon) or lexicon is None:
            lex = lexicon
        else:
            lex = read_lexicon(lexicon)
        return cls(families=parse_families(families), lexicon=lex, connective_window=connective_window,
                   **kwargs)

    def to_dict(self) -> dict:
        return {
            "families": sorted(self.families),
            "hedges": [" ".join(h) for h in self.hedges],
            "negators": sorted(self.negators),
            "connectives": [" ".join(c) for c in self.connectives],
            "lexicon": self.lexicon.to_rows() if self.lexicon is not None else None,
            "connective_window": self.connective_window,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureGroupConfig":
        return cls(
            families=frozenset(obj["families"]),
            hedges=tuple(tuple(h.split()) for h in obj["hedges"]),
            negators=frozenset(obj["negators"]),
            connectives=tuple(tuple(c.split()) for c in obj["connectives"]),
            lexicon=Lexicon.from_rows(obj["lexicon"]) if obj["lexicon"] is not None else None,
            connective_window=int(obj["connective_window"]),
        )


@dataclass(frozen=True)
class BinSpec:
    mean: float
    stdev: float

    def __post_init__(self):
        if not self.stdev > 0:
            raise ValueError(f"BinSpec needs stdev > 0, got {self.stdev}")


_EDGES = (-1.5, -0.5, 0.5, 1.5)


def standardize_and_bin(value: float, spec: BinSpec) -> int:
    """Bin 1..5 of the standardized value; bins are closed on the right."""
    if not math.isfinite(value):
        raise ValueError(f"cannot bin non-finite value {value}")
    z = (value - spec.mean) / spec.stdev
    for i, edge in enumerate(_EDGES, start=1):
        if z <= edge:
            return i
    return len(_EDGES) + 1


class FeatureVector(Mapping[str, float]):
    """Immutable set of active indicator features (every weight is 1.0)."""

    __slots__ = ("names", "_set")

    def __init__(self, names: Iterable[str] = ()):
        self._set = frozenset(names)
        self.names: tuple[str, ...] = tuple(sorted(self._set))

    def __getitem__(self, name):
        if name in self._set:
            return 1.0
        raise KeyError(name)

    def __iter__(self):
        return iter(self.names)

    def __len__(self):
        return len(self.names)

    def __contains__(self, name):
        return name in self._set

    def __eq__(self, other):
        if isinstance(other, FeatureVector):
            return self.names == other.names
        return super().__eq__(other)

    def __hash__(self):
        return hash(self.names)

    def __repr__(self):
        return f"FeatureVector({list(self.names)!r})"

    def family(self, fam: str) -> list[str]:
        return [n for n in self.names if n.startswith(fam + ":")]


@dataclass(frozen=True)
class UnitContext:
    """Where a unit sits: its turn, its position there, and the turn it replies to (if any)."""

    turn: Turn | None = None
    position: int = 0
    target: Turn | None = None


def turn_contexts(discussion: Discussion) -> Iterator[tuple[Turn, list[tuple[TextUnit, UnitContext]]]]:
    for turn in discussion.turns:
        target = discussion.target_of(turn)
        yield turn, [(u, UnitContext(turn, i, target)) for i, u in enumerate(turn.units)]


# --------------------------------------------------------------------------- TF-IDF

def strip_quotes(unit: TextUnit) -> str:
    text, pieces, last = unit.text, [], 0
    for start, end in sorted(unit.quote_spans):
        if start > last:
            pieces.append(text[last:start])
        last = max(last, end)
    pieces.append(text[last:])
    return " ".join(pieces)


def _turn_text_without_quotes(turn: Turn) -> str:
    return " ".join(strip_quotes(u) for u in turn.units)


@dataclass(frozen=True)
class TfidfTable:
    """Document frequencies over the training units; idf = log((1+N)/(1+df)) + 1."""

    n_documents: int = 0
    document_frequency: Mapping[str, int] = field(default_factory=dict)

    @classmethod
    def fit(cls, texts: Iterable[str]) -> "TfidfTable":
        df: Counter = Counter()
        n = 0
        for text in texts:
            n += 1
            df.update(set(words(text)))
        return cls(n, dict(sorted(df.items())))

    def idf(self, term: str) -> float:
        return math.log((1 + self.n_documents) / (1 + self.document_frequency.get(term, 0))) + 1.0

    def vector(self, text: str) -> dict[str, float]:
        return {t: c * self.idf(t) for t, c in Counter(words(text)).items()}

    def similarity(self, a: str, b: str) -> float:
        va, vb = self.vector(a), self.vector(b)
        if not va or not vb:
            return 0.0
        keys = sorted(va.keys() & vb.keys())
        dot = math.fsum(va[k] * vb[k] for k in keys)
        na = math.sqrt(math.fsum(v * v for v in va.values()))
        nb = math.sqrt(math.fsum(v * v for v in vb.values()))
        return min(1.0, max(0.0, dot / (na * nb)))


# --------------------------------------------------------------------------- feature templates

def _lexical(forms: list[str], out: set[str]) -> None:
    for w in forms:
        out.add(f"lex:uni={w}")
    for a, b in zip(forms, forms[1:]):
        out.add(f"lex:bi={a} {b}")


def _discourse(unit: TextUnit, forms: list[str], config: FeatureGroupConfig, out: set[str]) -> None:
    for n, tag in ((1, "uni"), (2, "bi"), (3, "tri")):
        if len(forms) >= n:
            out.add(f"disc:init_{tag}=" + "_".join(forms[:n]))
    for m in _REPEATED_PUNCT.finditer(unit.text):
        out.add(f"disc:rep_punct={m.group(1)}")
    hedges = find_phrases(forms, config.hedges)
    if hedges:
        out.add("disc:hedge")
        for _, _, phrase in hedges:
            out.add("disc:hedge=" + " ".join(phrase))


def _syntactic(unit: TextUnit, forms: list[str], out: set[str]) -> None:
    for tok, w in zip(unit.tokens, forms):
        if tok.pos:
            out.add(f"syn:uni_pos={w}/{tok.pos}")
    for arc in unit.arcs:
        h, d = forms[arc.head_index], forms[arc.dependent_index]
        hpos, dpos = unit.tokens[arc.head_index].pos, unit.tokens[arc.dependent_index].pos
        out.add("syn:" + rel_surface(arc.relation, h, d))
        out.add("syn:" + rel_surface(GENERAL_REL, h, d))
        if hpos:
            out.add("syn:" + rel_surface(arc.relation, hpos, d))
        if dpos:
            out.add("syn:" + rel_surface(arc.relation, h, dpos))


def _sentiment(unit: TextUnit, forms: list[str], config: FeatureGroupConfig, out: set[str]) -> None:
    polarity = config.lexicon.sentiment_words()
    senti_positions = [i for i, w in enumerate(forms) if w in polarity]
    for i in senti_positions:
        out.add(f"sent:word={forms[i]}")
        out.add("sent:has_pos" if polarity[forms[i]] > 0 else "sent:has_neg")
    window = config.connective_window
    for start, end, phrase in find_phrases(forms, config.connectives):
        conn = "_".join(phrase)
        for i in senti_positions:
            if start - window <= i < start or end <= i < end + window:
                out.add(f"sent:conn={conn}+{forms[i]}")
    for arc in unit.arcs:
        h, d = forms[arc.head_index], forms[arc.dependent_index]
        if h not in polarity and d not in polarity:
            continue
        h2 = placeholder(polarity[h]) if h in polarity else h
        d2 = placeholder(polarity[d]) if d in polarity else d
        out.add("sent:" + rel_surface(arc.relation, h2, d2))
        out.add("sent:" + rel_surface(GENERAL_REL, h2, d2))


def quote_overlap(unit: TextUnit, target: Turn | None) -> int:
    """Words of the unit's quoted text that appear verbatim in the target turn."""
    if target is None:
        return 0
    haystack = " ".join(words(target.text))
    total = 0
    for start, end in unit.quote_spans:
        quoted = words(unit.text[start:end])
        if quoted and " ".join(quoted) in haystack:
            total += len(quoted)
    return total


def numeric_quantities(unit: TextUnit, context: UnitContext, config: FeatureGroupConfig,
                       tfidf: TfidfTable) -> dict[str, float]:
    forms = [norm(t.form) for t in unit.tokens]
    out: dict[str, float] = {}
    fams = config.families
    if "lex" in fams:
        # single letters ("I", "A") are not shouting
        out["lex:upper"] = float(sum(1 for t in unit.tokens if len(t.form) > 1 and t.form.isupper()))
        out["lex:words"] = float(sum(1 for t in unit.tokens if is_word(t.form)))
    if "disc" in fams:
        out["disc:negators"] = float(sum(1 for w in forms if w in config.negators))
    if "conv" in fams and context.target is not None:
        out["conv:quote_overlap"] = float(quote_overlap(unit, context.target))
        out["conv:tfidf"] = tfidf.similarity(strip_quotes(unit), _turn_text_without_quotes(context.target))
    return out


@dataclass(frozen=True)
class FeatureStats:
    """Training-split statistics: bin specs per numeric quantity and the TF-IDF table."""

    bins: Mapping[str, BinSpec] = field(default_factory=dict)
    tfidf: TfidfTable = field(default_factory=TfidfTable)

    def to_dict(self) -> dict:
        return {
            "bins": {k: [v.mean, v.stdev] for k, v in sorted(self.bins.items())},
            "tfidf": {"n": self.tfidf.n_documents, "df": dict(self.tfidf.document_frequency)},
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureStats":
        return cls({k: BinSpec(*v) for k, v in obj["bins"].items()},
                   TfidfTable(int(obj["tfidf"]["n"]), dict(obj["tfidf"]["df"])))


def extract_features(unit: TextUnit, context: UnitContext, config: FeatureGroupConfig,
                     stats: FeatureStats) -> FeatureVector:
    forms = [norm(t.form) for t in unit.tokens]
    out: set[str] = set()
    fams = config.families
    if "lex" in fams:
        _lexical(forms, out)
    if "disc" in fams:
        _discourse(unit, forms, config, out)
    if "syn" in fams:
        _syntactic(unit, forms, out)
    if "sent" in fams:
        _sentiment(unit, forms, config, out)
    for name, value in numeric_quantities(unit, context, config, stats.tfidf).items():
        spec = stats.bins.get(name)
        if spec is not None:
            out.add(f"{name}=bin{standardize_and_bin(value, spec)}")
    return FeatureVector(out)


def fit_stats(examples: Sequence[tuple[TextUnit, UnitContext]], config: FeatureGroupConfig) -> FeatureStats:
    """Estimate TF-IDF document frequencies and per-quantity mean/stdev on training units.

    Quantities with zero variance get no BinSpec and are never emitted.
    """
    tfidf = TfidfTable.fit(strip_quotes(u) for u, _ in examples)
    columns: dict[str, list[float]] = {}
    for unit, ctx in examples:
        for name, value in numeric_quantities(unit, ctx, config, tfidf).items():
            columns.setdefault(name, []).append(value)
    bins = {}
    for name in sorted(columns):
        values = columns[name]
        mean = math.fsum(values) / len(values)
        stdev = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / len(values))
        if stdev > 0 and math.isfinite(stdev):
            bins[name] = BinSpec(mean, stdev)
    return FeatureStats(bins, tfidf)


class FeatureExtractor:
    """Config plus frozen training statistics."""

    def __init__(self, config: FeatureGroupConfig, stats: FeatureStats | None = None):
        self.config = config
        self.stats = stats if stats is not None else FeatureStats()

    def fit(self, examples: Iterable[tuple[TextUnit, UnitContext]]) -> "FeatureExtractor":
        self.stats = fit_stats(list(examples), self.config)
        return self

    def extract(self, unit: TextUnit, context: UnitContext = UnitContext()) -> FeatureVector:
        return extract_features(unit, context, self.config, self.stats)

    def to_dict(self) -> dict:
        return {"config": self.config.to_dict(), "stats": self.stats.to_dict()}

    @classmethod
    def from_dict(cls, obj: dict) -> "FeatureExtractor":
        return cls(FeatureGroupConfig.from_dict(obj["config"]), FeatureStats.from_dict(obj["stats"]))
