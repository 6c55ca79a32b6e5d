"""Bootstrapping a discussion sentiment lexicon by label propagation.

Nodes are text units (unigrams, bigrams, dependency relations and sentiment
dependency relations, with relation names replaced by a general label) seen in
enough discussions. Each node is described by clipped PMI scores against its
top co-occurring units; edges join units that share a sentence and are weighted
by the cosine of their PMI vectors. Seed words are clamped to +1/-1 while every
other node repeatedly takes the weighted average of its neighbours.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from ._text import GENERAL_REL, ConfigError, norm, placeholder, read_lines, rel_surface
from .corpus import Discussion, TextUnit
from .isotonic import Lexicon, LexiconEntry

log = logging.getLogger(__name__)

UnitKey = tuple[str, str]  # (unit_type, surface)

DEFAULT_MIN_DISCUSSIONS = 10
DEFAULT_TOP_K = 50
DEFAULT_ITERATIONS = 10
DEFAULT_THETA = 0.2
SWN_THRESHOLD = 0.7


def sentence_units(unit: TextUnit, sentiment: dict[str, int] | None = None) -> list[UnitKey]:
    """Text-unit occurrences in one sentence (with repetition), in a fixed order."""
    forms = [norm(t.form) for t in unit.tokens]
    out: list[UnitKey] = [("uni", w) for w in forms]
    out += [("bi", f"{a} {b}") for a, b in zip(forms, forms[1:])]
    sentiment = sentiment or {}
    for arc in unit.arcs:
        h, d = forms[arc.head_index], forms[arc.dependent_index]
        out.append(("dep", rel_surface(GENERAL_REL, h, d)))
        if h in sentiment or d in sentiment:
            h2 = placeholder(sentiment[h]) if h in sentiment else h
            d2 = placeholder(sentiment[d]) if d in sentiment else d
            out.append(("sentdep", rel_surface(GENERAL_REL, h2, d2)))
    return out


@dataclass(frozen=True)
class UnitNode:
    unit_type: str
    surface: str
    discussion_count: int

    @property
    def key(self) -> UnitKey:
        return (self.unit_type, self.surface)


@dataclass
class UnitStatistics:
    """Surviving nodes with sentence-level counts.

    ``sentence_counts[i]`` is the number of sentences containing node i and
    ``cooccurrence[(i, j)]`` (i < j) the number of sentences containing both.
    """

    nodes: list[UnitNode]
    n_sentences: int
    sentence_counts: np.ndarray
    cooccurrence: dict[tuple[int, int], int]


def extract_text_units(corpus: Sequence[Discussion], sentiment: dict[str, int] | None = None,
                       min_discussions: int = DEFAULT_MIN_DISCUSSIONS) -> UnitStatistics:
    sentences = [(d_idx, set(sentence_units(u, sentiment)))
                 for d_idx, d in enumerate(corpus) for t in d.turns for u in t.units]
    seen_in: dict[UnitKey, set[int]] = {}
    for d_idx, keys in sentences:
        for k in keys:
            seen_in.setdefault(k, set()).add(d_idx)
    kept = sorted(k for k, ds in seen_in.items() if len(ds) >= min_discussions)
    nodes = [UnitNode(t, s, len(seen_in[(t, s)])) for t, s in kept]
    index = {k: i for i, k in enumerate(kept)}
    counts = np.zeros(len(nodes), dtype=np.int64)
    cooc: Counter = Counter()
    for _, keys in sentences:
        ids = sorted(index[k] for k in keys if k in index)
        counts[ids] += 1
        cooc.update(combinations(ids, 2))
    return UnitStatistics(nodes, len(sentences), counts, dict(sorted(cooc.items())))


@dataclass(frozen=True)
class PmiVector:
    owner: int
    entries: tuple[tuple[int, float], ...]  # (node id, clipped PMI), PMI descending


def pmi(n: int, c_ab: int, c_a: int, c_b: int) -> float:
    return max(0.0, math.log(n * c_ab / (c_a * c_b)))


@dataclass
class UnitGraph:
    nodes: list[UnitNode]
    weights: sp.csr_matrix
    pmi_vectors: list[PmiVector] = field(default_factory=list)

    def __post_init__(self):
        self.index = {n.key: i for i, n in enumerate(self.nodes)}

    @property
    def n_edges(self) -> int:
        return int(sp.triu(self.weights, k=1).nnz)

    def weight(self, a: UnitKey, b: UnitKey) -> float:
        return float(self.weights[self.index[a], self.index[b]])

    def neighbours(self, key: UnitKey) -> dict[UnitKey, float]:
        row = self.weights.getrow(self.index[key])
        return {self.nodes[j].key: float(w) for j, w in zip(row.indices, row.data)}


def build_graph(stats: UnitStatistics, top_k: int = DEFAULT_TOP_K) -> UnitGraph:
    n_nodes = len(stats.nodes)
    partners: list[list[tuple[int, float]]] = [[] for _ in range(n_nodes)]
    for (i, j), c in stats.cooccurrence.items():
        score = pmi(stats.n_sentences, c, int(stats.sentence_counts[i]), int(stats.sentence_counts[j]))
        partners[i].append((j, score))
        partners[j].append((i, score))
    vectors = []
    rows, cols, vals = [], [], []
    for i, plist in enumerate(partners):
        top = sorted(plist, key=lambda p: (-p[1], p[0]))[:top_k]
        vectors.append(PmiVector(i, tuple(top)))
        norm2 = math.sqrt(math.fsum(v * v for _, v in top))
        for j, v in top:
            if norm2 > 0 and v > 0:
                rows.append(i)
                cols.append(j)
                vals.append(v / norm2)
    unit = sp.csr_matrix((vals, (rows, cols)), shape=(n_nodes, n_nodes))
    unit.sort_indices()
    pairs = np.array(list(stats.cooccurrence.keys()), dtype=np.intp).reshape(-1, 2)
    if len(pairs):
        cos = np.asarray(unit[pairs[:, 0]].multiply(unit[pairs[:, 1]]).sum(axis=1)).ravel()
        cos = np.clip(cos, 0.0, 1.0)
        W = sp.coo_matrix((np.concatenate((cos, cos)),
                           (np.concatenate((pairs[:, 0], pairs[:, 1])), np.concatenate((pairs[:, 1], pairs[:, 0])))),
                          shape=(n_nodes, n_nodes)).tocsr()
    else:
        W = sp.csr_matrix((n_nodes, n_nodes))
    W.sort_indices()
    return UnitGraph(stats.nodes, W, vectors)


# --------------------------------------------------------------------------- seeds

@dataclass(frozen=True)
class SeedSet:
    positive: frozenset[str]
    negative: frozenset[str]

    def __post_init__(self):
        both = self.positive & self.negative
        if both:
            raise ValueError(f"seed words in both P and N: {sorted(both)[:5]}")

    def swapped(self) -> "SeedSet":
        return SeedSet(self.negative, self.positive)

    def as_polarity(self) -> dict[str, int]:
        out = {w: 1 for w in self.positive}
        out.update({w: -1 for w in self.negative})
        return out


_POS_TAGS = {"positive", "pos", "positiv", "+", "1", "agree"}
_NEG_TAGS = {"negative", "neg", "negativ", "-", "-1", "disagree"}


def _tag_polarity(tag: str) -> int:
    t = tag.strip().lower()
    if t in _POS_TAGS:
        return 1
    if t in _NEG_TAGS:
        return -1
    return 0


def read_mpqa(path) -> dict[str, set[int]]:
    """TSV ``word<TAB>polarity``; also accepts raw MPQA ``word1=... priorpolarity=...`` lines."""
    out: dict[str, set[int]] = {}
    for line in read_lines(path):
        if "=" in line and "\t" not in line:
            fields = dict(f.split("=", 1) for f in line.split() if "=" in f)
            word, pol = fields.get("word1"), fields.get("priorpolarity", "")
        else:
            parts = line.split("\t")
            if len(parts) < 2:
                raise ConfigError(f"{path}: expected 'word<TAB>polarity', got {line!r}")
            word, pol = parts[0], parts[1]
        p = _tag_polarity(pol)
        if word and p:
            out.setdefault(norm(word.strip()), set()).add(p)
    return out


def read_general_inquirer(path) -> dict[str, set[int]]:
    """Whitespace-separated ``WORD[#sense] tag tag ...``; Positiv/Negativ tags give the polarity."""
    out: dict[str, set[int]] = {}
    for line in read_lines(path):
        parts = line.split()
        word = norm(parts[0].split("#")[0])
        pols = {_tag_polarity(t) for t in parts[1:]} - {0}
        if word and pols:
            out.setdefault(word, set()).update(pols)
    return out


def read_sentiwordnet(path, threshold: float = SWN_THRESHOLD) -> dict[str, set[int]]:
    """TSV ``word<TAB>pos_score<TAB>neg_score``; a polarity counts only when its score exceeds the threshold."""
    out: dict[str, set[int]] = {}
    for line in read_lines(path):
        parts = line.split("\t")
        if len(parts) < 3:
            raise ConfigError(f"{path}: expected 'word<TAB>pos_score<TAB>neg_score', got {line!r}")
        try:
            pos, neg = float(parts[1]), float(parts[2])
        except ValueError as exc:
            raise ConfigError(f"{path}: bad score in {line!r}") from exc
        word = norm(parts[0].strip().split("#")[0])
        if pos > threshold:
            out.setdefault(word, set()).add(1)
        if neg > threshold:
            out.setdefault(word, set()).add(-1)
    return out


def merge_seed_sources(*sources: dict[str, set[int]]) -> SeedSet:
    votes: dict[str, set[int]] = {}
    for src in sources:
        for w, pols in src.items():
            votes.setdefault(w, set()).update(pols)
    pos = frozenset(w for w, p in votes.items() if p == {1})
    neg = frozenset(w for w, p in votes.items() if p == {-1})
    return SeedSet(pos, neg)


def load_seeds(mpqa=None, general_inquirer=None, sentiwordnet=None,
               swn_threshold: float = SWN_THRESHOLD) -> SeedSet:
    """Union of the given seed lexicons minus words with conflicting polarity."""
    sources = []
    if mpqa is not None:
        sources.append(read_mpqa(mpqa))
    if general_inquirer is not None:
        sources.append(read_general_inquirer(general_inquirer))
    if sentiwordnet is not None:
        sources.append(read_sentiwordnet(sentiwordnet, swn_threshold))
    return merge_seed_sources(*sources)


# --------------------------------------------------------------------------- propagation

@dataclass
class Propagation:
    scores: np.ndarray
    max_change: list[float]  # max |y(t) - y(t-1)| for each iteration


def seed_vector(graph: UnitGraph, seeds: SeedSet) -> np.ndarray:
    """+1/-1 on seed unigram nodes, 0 elsewhere."""
    y = np.zeros(len(graph.nodes))
    missing = 0
    for words_, value in ((seeds.positive, 1.0), (seeds.negative, -1.0)):
        for w in sorted(words_):
            i = graph.index.get(("uni", w))
            if i is None:
                missing += 1
            else:
                y[i] = value
    if missing:
        log.warning("%d seed words are not unigram nodes of the graph and were ignored", missing)
    return y


def propagate(graph: UnitGraph, seeds: SeedSet, iterations: int = DEFAULT_ITERATIONS) -> Propagation:
    """Synchronous label propagation: each sweep reads only the previous sweep's scores."""
    if iterations < 1:
        raise ConfigError(f"propagation needs at least one iteration, got {iterations}")
    clamp = seed_vector(graph, seeds)
    is_seed = clamp != 0
    W = graph.weights
    degree = np.asarray(W.sum(axis=1)).ravel()
    has_edges = degree > 0
    y = clamp.copy()
    changes = []
    for _ in range(iterations):
        num = W @ y
        new = y.copy()
        new[has_edges] = num[has_edges] / degree[has_edges]
        np.clip(new, -1.0, 1.0, out=new)  # absorbs rounding in the weighted average
        new[is_seed] = clamp[is_seed]
        changes.append(float(np.max(np.abs(new - y))) if len(y) else 0.0)
        y = new
    return Propagation(y, changes)


def induce_lexicon(graph: UnitGraph, scores: np.ndarray, theta: float = DEFAULT_THETA,
                   header: dict | None = None) -> Lexicon:
    """Nodes scoring at least ``theta`` in magnitude, strongest first."""
    if not theta > 0:
        raise ConfigError(f"lexicon threshold must be > 0, got {theta}")
    picked = [(node, float(s)) for node, s in zip(graph.nodes, scores) if abs(s) >= theta]
    picked.sort(key=lambda p: (-abs(p[1]), p[0].unit_type, p[0].surface))
    return Lexicon((LexiconEntry(n.unit_type, n.surface, s) for n, s in picked), header)


def build_lexicon(corpus: Iterable[Discussion], seeds: SeedSet, iterations: int = DEFAULT_ITERATIONS,
                  theta: float = DEFAULT_THETA, min_discussions: int = DEFAULT_MIN_DISCUSSIONS,
                  top_k: int = DEFAULT_TOP_K) -> tuple[Lexicon, UnitGraph, Propagation]:
    """Full pipeline on an already participant-filtered corpus."""
    stats = extract_text_units(list(corpus), seeds.as_polarity(), min_discussions)
    graph = build_graph(stats, top_k)
    result = propagate(graph, seeds, iterations)
    header = {"T": iterations, "theta": theta, "nodes": len(graph.nodes), "edges": graph.n_edges}
    return induce_lexicon(graph, result.scores, theta, header), graph, result
