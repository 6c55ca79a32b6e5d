"""End-to-end tagger: feature extraction state plus a trained CRF, saved as one model file."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .corpus import LABELS, Discussion, OrdinalLabel, TextUnit, Turn
from .crf import CrfModel, TrainConfig, forward_backward, model_from_dict, model_to_dict, train, viterbi
from .evaluation import collapse_labels, downsample as drop_neutral_turns
from .features import FeatureExtractor, FeatureGroupConfig, FeatureVector, UnitContext, turn_contexts
from .isotonic import Lexicon

TAGGER_FORMAT = "isocrf-tagger"
TAGGER_VERSION = 1


@dataclass(frozen=True)
class Prediction:
    discussion_id: str
    turn_id: str
    unit_index: int
    label: OrdinalLabel
    posterior: tuple[float, ...]

    def tsv_row(self) -> str:
        probs = "\t".join(repr(float(p)) for p in self.posterior)
        return (f"{self.discussion_id}\t{self.turn_id}\t{self.unit_index}\t{self.label.name}\t"
                f"{collapse_labels(self.label).value}\t{probs}")


PREDICTION_HEADER = ("discussion_id\tturn_id\tunit_index\tlabel_5way\tlabel_3way\t"
                     + "\t".join(f"p_{lab.name}" for lab in LABELS))


def labeled_turns(corpus: Iterable[Discussion]) -> list[tuple[Turn, list[tuple[TextUnit, UnitContext]]]]:
    out = []
    for d in corpus:
        for turn, items in turn_contexts(d):
            missing = [i for i, (u, _) in enumerate(items) if u.gold is None]
            if missing:
                raise ValueError(f"discussion {d.id!r} turn {turn.id!r}: unit(s) {missing} have no gold label")
            out.append((turn, items))
    return out


class Tagger:
    def __init__(self, extractor: FeatureExtractor, model: CrfModel, lexicon: Lexicon | None = None):
        self.extractor = extractor
        self.model = model
        self.lexicon = lexicon  # the constraint lexicon, if trained isotonically

    def featurize(self, items: Sequence[tuple[TextUnit, UnitContext]]) -> list[FeatureVector]:
        return [self.extractor.extract(u, c) for u, c in items]

    def tag_discussion(self, discussion: Discussion) -> Iterator[Prediction]:
        for turn, items in turn_contexts(discussion):
            x = self.featurize(items)
            labels = viterbi(self.model, x)
            marginals = forward_backward(self.model, x).marginals
            for i, (lab, post) in enumerate(zip(labels, marginals)):
                yield Prediction(discussion.id, turn.id, i, lab, tuple(np.asarray(post).tolist()))

    def tag(self, corpus: Iterable[Discussion]) -> Iterator[Prediction]:
        for d in corpus:
            yield from self.tag_discussion(d)

    def to_dict(self) -> dict:
        return {
            "format": TAGGER_FORMAT,
            "version": TAGGER_VERSION,
            "extractor": self.extractor.to_dict(),
            "model": model_to_dict(self.model),
            "constraint_lexicon": self.lexicon.to_rows() if self.lexicon is not None else None,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Tagger":
        if obj.get("format") != TAGGER_FORMAT or obj.get("version") != TAGGER_VERSION:
            raise ValueError("not an isocrf tagger file (or unsupported version)")
        lex = obj.get("constraint_lexicon")
        return cls(FeatureExtractor.from_dict(obj["extractor"]), model_from_dict(obj["model"]),
                   Lexicon.from_rows(lex) if lex is not None else None)

    def save(self, path) -> None:
        data = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=False)
        Path(path).write_text(data + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Tagger":
        try:
            obj = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a model file ({exc.msg})") from exc
        return cls.from_dict(obj)


def train_tagger(corpus: Sequence[Discussion], feature_config: FeatureGroupConfig,
                 lexicon: Lexicon | None = None, config: TrainConfig = TrainConfig(),
                 downsample: bool = False) -> Tagger:
    """Fit feature statistics and a CRF on every turn of the corpus.

    Passing a lexicon trains an isotonic CRF whose lexicon-tied emission weights
    are monotone in the label order; without one a plain CRF is trained.
    """
    turns = labeled_turns(corpus)
    if downsample:
        keep = {id(t) for t in drop_neutral_turns(t for t, _ in turns)}
        turns = [(t, items) for t, items in turns if id(t) in keep]
    if not turns:
        raise ValueError("no training turns left")
    extractor = FeatureExtractor(feature_config).fit(pair for _, items in turns for pair in items)
    sequences = [[extractor.extract(u, c).names for u, c in items] for _, items in turns]
    labels = [[u.gold for u, _ in items] for _, items in turns]
    model = train(sequences, labels, lexicon, config)
    return Tagger(extractor, model, lexicon)
