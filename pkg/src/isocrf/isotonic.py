"""Monotonicity constraints over lexicon-tied emission weights.

For a feature ``w`` in the positive lexicon the five emission weights
``mu[NN, w] <= mu[N, w] <= ... <= mu[PP, w]`` must be non-decreasing along the
label order; negative-lexicon features must be non-increasing. Constrained
training is turned into an unconstrained problem by writing each constrained
weight row as a base value plus a cumulative sum of squared increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Sequence

import numpy as np

from ._text import ConfigError, normalize_surface, read_lines
from .corpus import LABELS, OrdinalLabel

if TYPE_CHECKING:
    from .crf import CrfModel, FeatureIndex

UNIT_TYPES = ("uni", "bi", "dep", "sentdep")
ASCENDING = 1
DESCENDING = -1
N_LABELS = len(LABELS)


# --------------------------------------------------------------------------- lexicon

@dataclass(frozen=True)
class LexiconEntry:
    unit_type: str
    surface: str
    score: float


class Lexicon:
    """Positive set M_p and negative set M_n of text units, each with a polarity score."""

    def __init__(self, entries: Iterable[LexiconEntry] = (), header: dict | None = None):
        self.entries: tuple[LexiconEntry, ...] = tuple(entries)
        self.header = dict(header or {})
        seen: dict[str, LexiconEntry] = {}
        for e in self.entries:
            if e.unit_type not in UNIT_TYPES:
                raise ValueError(f"unknown unit type {e.unit_type!r} for {e.surface!r}")
            if not (-1.0 <= e.score <= 1.0) or e.score == 0 or math.isnan(e.score):
                raise ValueError(f"lexicon score for {e.surface!r} must be non-zero and in [-1, 1], got {e.score}")
            if e.surface in seen:
                raise ValueError(f"duplicate lexicon surface {e.surface!r}")
            seen[e.surface] = e

    @property
    def positive(self) -> dict[str, float]:
        return {e.surface: e.score for e in self.entries if e.score > 0}

    @property
    def negative(self) -> dict[str, float]:
        return {e.surface: e.score for e in self.entries if e.score < 0}

    def polarity_of(self, surface: str) -> int:
        for e in self.entries:
            if e.surface == surface:
                return 1 if e.score > 0 else -1
        return 0

    def sentiment_words(self) -> dict[str, int]:
        """Unigram entries mapped to +1/-1."""
        return {e.surface: (1 if e.score > 0 else -1) for e in self.entries if e.unit_type == "uni"}

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __eq__(self, other):
        return isinstance(other, Lexicon) and self.entries == other.entries

    def to_rows(self) -> list[list]:
        return [[e.unit_type, e.surface, e.score] for e in self.entries]

    @classmethod
    def from_rows(cls, rows) -> "Lexicon":
        return cls(LexiconEntry(t, s, float(v)) for t, s, v in rows)


def read_lexicon(path) -> Lexicon:
    """Read the lexicon TSV: ``unit_type<TAB>surface<TAB>score``; ``#`` lines are header/comments."""
    entries = []
    for lineno, line in enumerate(read_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 3:
            raise ConfigError(f"{path}: entry {lineno}: expected 3 tab-separated fields, got {len(parts)}")
        unit_type, surface, score = parts
        try:
            entries.append(LexiconEntry(unit_type, normalize_surface(surface, unit_type), float(score)))
        except ValueError as exc:
            raise ConfigError(f"{path}: entry {lineno}: {exc}") from exc
    try:
        return Lexicon(entries, _read_header(path))
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _read_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return {}
    fields = [f.split("=", 1) for f in first[1:].strip().split("\t")]
    return {f[0].strip(): f[1].strip() for f in fields if len(f) == 2}


def write_lexicon(lexicon: Lexicon, path, header: dict | None = None) -> None:
    header = header if header is not None else lexicon.header
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        if header:
            fh.write("# " + "\t".join(f"{k}={v}" for k, v in header.items()) + "\n")
        for e in lexicon.entries:
            fh.write(f"{e.unit_type}\t{e.surface}\t{e.score!r}\n")


def lexicon_feature_names(entry: LexiconEntry) -> tuple[str, ...]:
    """Emission features whose observation component is this lexicon entry."""
    s = entry.surface
    if entry.unit_type == "uni":
        return (f"lex:uni={s}", f"sent:word={s}")
    if entry.unit_type == "bi":
        return (f"lex:bi={s}",)
    if entry.unit_type == "dep":
        return (f"syn:{s}",)
    return (f"sent:{s}",)


# --------------------------------------------------------------------------- constraints

@dataclass(frozen=True)
class ConstraintGroup:
    feature: str
    feature_id: int
    direction: int  # ASCENDING or DESCENDING

    @property
    def slots(self) -> tuple[OrdinalLabel, ...]:
        return LABELS


def build_constraints(lexicon: Lexicon, feature_index: "FeatureIndex") -> list[ConstraintGroup]:
    groups: dict[int, ConstraintGroup] = {}
    for entry in lexicon:
        direction = ASCENDING if entry.score > 0 else DESCENDING
        for name in lexicon_feature_names(entry):
            fid = feature_index.get(name)
            if fid is not None and fid not in groups:
                groups[fid] = ConstraintGroup(name, fid, direction)
    return [groups[k] for k in sorted(groups)]


def reparameterize(base: float, roots: Sequence[float], direction: int = ASCENDING) -> np.ndarray:
    """Five monotone weights from a base value and four increment roots."""
    roots = np.asarray(roots, dtype=float)
    if roots.shape != (N_LABELS - 1,):
        raise ValueError(f"expected {N_LABELS - 1} increment roots, got shape {roots.shape}")
    steps = np.concatenate(([0.0], np.cumsum(roots * roots)))
    return base + direction * steps


def invert_reparameterization(weights: Sequence[float], direction: int = ASCENDING) -> tuple[float, np.ndarray]:
    """Inverse of :func:`reparameterize` for a monotone 5-vector."""
    w = np.asarray(weights, dtype=float)
    gaps = direction * np.diff(w)
    if np.any(gaps < 0):
        raise ValueError(f"weights {w} are not monotone in direction {direction}")
    return float(w[0]), np.sqrt(gaps)


class PlainParameterization:
    """Identity map between the free vector and (transitions, emissions)."""

    def __init__(self, n_features: int):
        self.n_features = n_features
        self.size = N_LABELS * N_LABELS + N_LABELS * n_features

    def to_natural(self, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = N_LABELS * N_LABELS
        return z[:k].reshape(N_LABELS, N_LABELS), z[k:].reshape(self.n_features, N_LABELS)

    def pullback(self, z: np.ndarray, g_trans: np.ndarray, g_emit: np.ndarray) -> np.ndarray:
        return np.concatenate((g_trans.ravel(), g_emit.ravel()))

    def from_natural(self, trans: np.ndarray, emit: np.ndarray) -> np.ndarray:
        return np.concatenate((np.asarray(trans, float).ravel(), np.asarray(emit, float).ravel()))


class IsotonicParameterization(PlainParameterization):
    """Free vector layout: 25 transitions, unconstrained emission rows, then (base, 4 roots) per group."""

    def __init__(self, n_features: int, groups: Sequence[ConstraintGroup]):
        super().__init__(n_features)
        self.groups = tuple(groups)
        self.constrained = np.array([g.feature_id for g in self.groups], dtype=np.intp)
        self.directions = np.array([g.direction for g in self.groups], dtype=float)
        mask = np.ones(n_features, dtype=bool)
        mask[self.constrained] = False
        self.free_rows = np.flatnonzero(mask)
        if len(set(self.constrained.tolist())) != len(self.constrained):
            raise ValueError("a feature appears in more than one constraint group")

    def _split(self, z):
        k = N_LABELS * N_LABELS
        m = k + N_LABELS * len(self.free_rows)
        return (z[:k].reshape(N_LABELS, N_LABELS),
                z[k:m].reshape(len(self.free_rows), N_LABELS),
                z[m:].reshape(len(self.groups), N_LABELS))

    def to_natural(self, z):
        trans, free, aux = self._split(z)
        emit = np.empty((self.n_features, N_LABELS))
        emit[self.free_rows] = free
        if len(self.groups):
            roots = aux[:, 1:]
            steps = np.zeros((len(self.groups), N_LABELS))
            steps[:, 1:] = np.cumsum(roots * roots, axis=1)
            emit[self.constrained] = aux[:, :1] + self.directions[:, None] * steps
        return trans.copy(), emit

    def pullback(self, z, g_trans, g_emit):
        _, _, aux = self._split(z)
        g_aux = np.zeros_like(aux)
        if len(self.groups):
            g_rows = g_emit[self.constrained]
            g_aux[:, 0] = g_rows.sum(axis=1)
            # d mu_j / d rho_i = 2 * direction * rho_i for every j >= i
            tail = np.cumsum(g_rows[:, ::-1], axis=1)[:, ::-1][:, 1:]
            g_aux[:, 1:] = 2.0 * self.directions[:, None] * aux[:, 1:] * tail
        return np.concatenate((g_trans.ravel(), g_emit[self.free_rows].ravel(), g_aux.ravel()))

    def from_natural(self, trans, emit):
        emit = np.asarray(emit, float)
        aux = np.empty((len(self.groups), N_LABELS))
        for i, g in enumerate(self.groups):
            base, roots = invert_reparameterization(emit[g.feature_id], g.direction)
            aux[i, 0], aux[i, 1:] = base, roots
        return np.concatenate((np.asarray(trans, float).ravel(), emit[self.free_rows].ravel(), aux.ravel()))


# --------------------------------------------------------------------------- verification

@dataclass(frozen=True)
class Violation:
    feature: str
    lower: OrdinalLabel
    higher: OrdinalLabel
    gap: float  # how far the ordering is broken (> 0)


def verify_monotonicity(model: "CrfModel", lexicon: Lexicon) -> list[Violation]:
    """One violation per lexicon-tied feature whose weights break the required order, reporting the worst pair."""
    out = []
    for group in build_constraints(lexicon, model.feature_index):
        w = group.direction * model.emissions[group.feature_id]
        worst = None
        for lo in range(N_LABELS):
            for hi in range(lo + 1, N_LABELS):
                gap = w[lo] - w[hi]
                if gap > 0 and (worst is None or gap > worst[2]):
                    worst = (lo, hi, gap)
        if worst is not None:
            lo, hi, gap = worst
            out.append(Violation(group.feature, LABELS[lo], LABELS[hi], float(gap)))
    return out
