"""Synthetic data: label sequences sampled from a planted CRF, and toy discussion corpora.

Sampling uses forward filtering / backward sampling in probability space,
independently of the log-space inference in :mod:`isocrf.crf`.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass

import numpy as np

from .corpus import DependencyArc, Discussion, OrdinalLabel, TextUnit, Token, Turn, dump_corpus
from .isotonic import Lexicon, LexiconEntry

K = 5


def ffbs_sample(node: np.ndarray, trans: np.ndarray, rng: np.random.Generator) -> list[int]:
    """Draw y ~ p(y | x) for potentials exp(node) and exp(trans)."""
    n = node.shape[0]
    psi = np.exp(node - node.max(axis=1, keepdims=True))
    T = np.exp(trans - trans.max())
    filt = np.empty((n, K))
    f = psi[0] / psi[0].sum()
    filt[0] = f
    for t in range(1, n):
        f = (f @ T) * psi[t]
        f = f / f.sum()
        filt[t] = f
    y = [0] * n
    y[-1] = int(rng.choice(K, p=filt[-1]))
    for t in range(n - 2, -1, -1):
        w = filt[t] * T[:, y[t + 1]]
        y[t] = int(rng.choice(K, p=w / w.sum()))
    return y


@dataclass
class PlantedTask:
    """Feature sequences (token lists) with labels drawn from a planted CRF."""

    tokens: list[list[list[str]]]  # sequence -> position -> words
    labels: list[list[int]]
    lexicon: Lexicon
    transitions: np.ndarray
    emissions: dict[str, np.ndarray]

    def features(self, i: int) -> list[list[str]]:
        return [[f"lex:uni={w}" for w in pos] for pos in self.tokens[i]]

    def units(self, i: int) -> list[TextUnit]:
        return [TextUnit(" ".join(ws), tuple(Token(w, "NN") for w in ws)) for ws in self.tokens[i]]


def planted_task(rng: np.random.Generator, n_sequences: int = 500, n_lexicon: int = 100,
                 n_topic: int = 60, lexicon_rate: float = 0.3, max_length: int = 6,
                 mean_words: float = 3.0, topic_scale: float = 1.0) -> PlantedTask:
    """Sequences whose extreme labels are driven by planted positive/negative lexicon words.

    Lexicon words carry monotone emission weights (ascending for positive words,
    descending for negative ones); topic words carry unconstrained random weights
    that only a trained model can exploit.
    """
    shape = np.array([-1.5, -1.0, 0.0, 1.0, 1.5])
    emissions: dict[str, np.ndarray] = {}
    entries = []
    for i in range(n_lexicon):
        strength = rng.uniform(0.5, 1.5)
        w = f"pos{i}"
        emissions[w] = strength * shape
        entries.append(LexiconEntry("uni", w, 1.0))
        w = f"neg{i}"
        emissions[w] = -strength * shape
        entries.append(LexiconEntry("uni", w, -1.0))
    for i in range(n_topic):
        emissions[f"topic{i}"] = rng.normal(0.0, topic_scale, K)
    lex_words = [e.surface for e in entries]
    topic_words = [f"topic{i}" for i in range(n_topic)]
    trans = np.full((K, K), -0.3)
    for a in range(K):
        for b in range(K):
            if a == b:
                trans[a, b] = 1.0
            elif abs(a - b) == 1:
                trans[a, b] = 0.3
    seqs, labels = [], []
    for _ in range(n_sequences):
        n = int(rng.integers(1, max_length + 1))
        seq = []
        for _ in range(n):
            k = 1 + int(rng.poisson(mean_words - 1))
            ws = [lex_words[rng.integers(len(lex_words))] if rng.random() < lexicon_rate
                  else topic_words[rng.integers(n_topic)] for _ in range(k)]
            seq.append(ws)
        node = np.array([sum(emissions[w] for w in ws) for ws in seq])
        seqs.append(seq)
        labels.append(ffbs_sample(node, trans, rng))
    return PlantedTask(seqs, labels, Lexicon(entries), trans, emissions)


# --------------------------------------------------------------------------- toy corpus

_VOCAB = {
    OrdinalLabel.PP: [["i", "totally", "agree", "with", "you"], ["good", "point", ",", "thanks"],
                      ["you", "are", "right", "!"]],
    OrdinalLabel.P: [["i", "agree", "mostly"], ["fair", "enough"], ["that", "seems", "good"]],
    OrdinalLabel.O: [["the", "article", "mentions", "the", "war"], ["see", "the", "source", "below"],
                     ["i", "moved", "the", "section"], ["the", "intro", "is", "long"]],
    OrdinalLabel.N: [["i", "do", "n't", "think", "so"], ["that", "is", "not", "accurate"],
                     ["so", "what", "?"]],
    OrdinalLabel.NN: [["you", "are", "wrong", "!!"], ["this", "is", "nonsense", "and", "propaganda"],
                      ["stop", "rewriting", "history", "!!"]],
}
_POS = {"i": "PRP", "you": "PRP", "this": "DT", "that": "DT", "the": "DT", "are": "VBP", "is": "VBZ",
        "agree": "VBP", "totally": "RB", "mostly": "RB", "with": "IN", "good": "JJ", "right": "JJ",
        "wrong": "JJ", "fair": "JJ", "enough": "RB", "point": "NN", "thanks": "NNS", "so": "RB",
        "what": "WP", "not": "RB", "n't": "RB", "do": "VBP", "think": "VB", "accurate": "JJ",
        "nonsense": "NN", "propaganda": "NN", "and": "CC", "stop": "VB", "rewriting": "VBG",
        "history": "NN", "article": "NN", "mentions": "VBZ", "war": "NN", "see": "VB", "source": "NN",
        "below": "RB", "moved": "VBD", "section": "NN", "intro": "NN", "long": "JJ", "seems": "VBZ"}
_SUBJ_HEADS = {"agree", "right", "wrong", "think", "nonsense", "accurate", "good", "long", "moved"}


def _unit(words: list[str], label: OrdinalLabel | None, quote: str | None = None) -> TextUnit:
    text = " ".join(words)
    quotes = ()
    if quote:
        text = f'"{quote}" ' + text
        quotes = ((0, len(quote) + 2),)
    tokens = tuple(Token(w, _POS.get(w, "NN" if w.isalpha() else ".")) for w in words)
    arcs = []
    subj = next((i for i, w in enumerate(words) if w in ("i", "you", "this", "that")), None)
    head = next((i for i, w in enumerate(words) if w in _SUBJ_HEADS), None)
    if subj is not None and head is not None and subj != head:
        arcs.append(DependencyArc("nsubj", head, subj))
    for i in range(1, len(words)):
        if _POS.get(words[i - 1]) == "JJ" and _POS.get(words[i]) == "NN":
            arcs.append(DependencyArc("amod", i, i - 1))
    return TextUnit(text, tokens, tuple(arcs), quotes, label)


def toy_corpus(seed: int = 0, n_discussions: int = 30, speakers: int = 6, turns: int = 8,
               labeled: bool = True) -> list[Discussion]:
    """Small Wikipedia-talk-like corpus with a planted agreement signal."""
    rng = np.random.default_rng(seed)
    order = list(OrdinalLabel)
    stay = np.array([0.15, 0.15, 0.4, 0.15, 0.15])
    out = []
    for d in range(n_discussions):
        names = [f"user{(d + s) % (speakers + 3)}" for s in range(speakers)]
        ts = []
        for t in range(turns):
            speaker = names[t % speakers] if t < speakers else names[int(rng.integers(speakers))]
            reply_to = None if t == 0 else f"t{int(rng.integers(t))}"
            units = []
            label = order[int(rng.choice(5, p=stay))]
            for _ in range(int(rng.integers(1, 4))):
                if rng.random() < 0.3:
                    label = order[int(rng.choice(5, p=stay))]
                pool = _VOCAB[label]
                words = list(pool[int(rng.integers(len(pool)))])
                quote = None
                if reply_to is not None and rng.random() < 0.2:
                    target_words = ts[int(reply_to[1:])].units[0].forms
                    quote = " ".join(target_words[:3])
                units.append(_unit(words, label if labeled else None, quote))
            ts.append(Turn(f"t{t}", speaker, tuple(units), reply_to))
        out.append(Discussion(f"d{d}", tuple(ts)))
    return out


def toy_seed_lists() -> dict[str, str]:
    """Contents for small MPQA-, GI- and SentiWordNet-style seed files matching :func:`toy_corpus`."""
    return {
        "mpqa": "agree\tpositive\ngood\tpositive\nwrong\tnegative\nnonsense\tnegative\n",
        "gi": "RIGHT#1 Positiv Virtue\nFAIR Positiv\nPROPAGANDA Negativ\nACCURATE Positiv\n",
        "swn": "thanks\t0.75\t0.0\nwrong\t0.0\t0.875\nhistory\t0.1\t0.2\nlong\t0.6\t0.1\n",
    }


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="Write a toy JSONL discussion corpus.")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--discussions", type=int, default=30)
    ap.add_argument("--out", default="-")
    args = ap.parse_args(argv)
    corpus = toy_corpus(args.seed, args.discussions)
    if args.out == "-":
        dump_corpus(corpus, sys.stdout)
    else:
        with open(args.out, "w", encoding="utf-8") as fh:
            dump_corpus(corpus, fh)
    return 0


if __name__ == "__main__":
    sys.exit(main())
