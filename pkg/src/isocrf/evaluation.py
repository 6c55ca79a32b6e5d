"""Scoring, label collapsing, downsampling, the polarity baseline and chi-square feature ranking."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Hashable, Iterable, Mapping, Sequence

from .corpus import OrdinalLabel, TextUnit, Turn
from .isotonic import Lexicon
from .lexicon import sentence_units


class Polarity3(str, enum.Enum):
    AGREEMENT = "agreement"
    DISAGREEMENT = "disagreement"
    NEUTRAL = "neutral"


CLASSES = (Polarity3.AGREEMENT, Polarity3.DISAGREEMENT, Polarity3.NEUTRAL)


def collapse_labels(label: OrdinalLabel) -> Polarity3:
    if label in (OrdinalLabel.NN, OrdinalLabel.N):
        return Polarity3.DISAGREEMENT
    if label in (OrdinalLabel.P, OrdinalLabel.PP):
        return Polarity3.AGREEMENT
    return Polarity3.NEUTRAL


def as_three_way(label) -> Polarity3:
    if isinstance(label, Polarity3):
        return label
    if isinstance(label, OrdinalLabel):
        return collapse_labels(label)
    if isinstance(label, str):
        if label in OrdinalLabel.__members__:
            return collapse_labels(OrdinalLabel[label])
        return Polarity3(label)
    raise ValueError(f"cannot interpret {label!r} as a 3-way label")


@dataclass(frozen=True)
class GoldItem:
    label: OrdinalLabel | Polarity3
    turn_inherited: bool = False


@dataclass
class ConfusionCounts:
    tp: dict[Polarity3, int]
    fp: dict[Polarity3, int]
    fn: dict[Polarity3, int]

    @classmethod
    def empty(cls) -> "ConfusionCounts":
        return cls({c: 0 for c in CLASSES}, {c: 0 for c in CLASSES}, {c: 0 for c in CLASSES})


@dataclass(frozen=True)
class ClassScore:
    precision: float
    recall: float
    f1: float


@dataclass(frozen=True)
class F1Report:
    mode: str
    scores: Mapping[Polarity3, ClassScore]
    counts: ConfusionCounts

    def __getitem__(self, cls) -> ClassScore:
        return self.scores[as_three_way(cls)]

    @property
    def macro_f1(self) -> float:
        return sum(s.f1 for s in self.scores.values()) / len(self.scores)

    def rows(self) -> list[tuple[str, float, float, float, str]]:
        return [(c.value, s.precision, s.recall, s.f1, self.mode) for c, s in self.scores.items()]

    def to_tsv(self) -> str:
        lines = ["class\tprecision\trecall\tf1\tmode"]
        lines += [f"{c}\t{p!r}\t{r!r}\t{f!r}\t{m}" for c, p, r, f, m in self.rows()]
        return "\n".join(lines) + "\n"

    def to_table(self) -> str:
        lines = [f"{'class':<14}{'P':>8}{'R':>8}{'F1':>8}  mode"]
        lines += [f"{c:<14}{p * 100:8.2f}{r * 100:8.2f}{f * 100:8.2f}  {m}" for c, p, r, f, m in self.rows()]
        return "\n".join(lines)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def confusion(gold: Sequence[GoldItem], pred: Sequence, mode: str = "strict") -> ConfusionCounts:
    if mode not in ("strict", "soft"):
        raise ValueError(f"mode must be 'strict' or 'soft', got {mode!r}")
    if len(gold) != len(pred):
        raise ValueError(f"{len(gold)} gold items but {len(pred)} predictions")
    counts = ConfusionCounts.empty()
    for g, p in zip(gold, pred):
        g_cls, p_cls = as_three_way(g.label), as_three_way(p)
        if mode == "soft" and g.turn_inherited and p_cls is Polarity3.NEUTRAL:
            # turn-inherited label predicted neutral: a neutral hit, not a miss
            g_cls = Polarity3.NEUTRAL
        if g_cls is p_cls:
            counts.tp[g_cls] += 1
        else:
            counts.fp[p_cls] += 1
            counts.fn[g_cls] += 1
    return counts


def score(gold: Sequence[GoldItem], pred: Sequence, mode: str = "strict") -> F1Report:
    counts = confusion(gold, pred, mode)
    scores = {}
    for c in CLASSES:
        tp, fp, fn = counts.tp[c], counts.fp[c], counts.fn[c]
        p, r = _ratio(tp, tp + fp), _ratio(tp, tp + fn)
        scores[c] = ClassScore(p, r, 2 * p * r / (p + r) if p + r > 0 else 0.0)
    return F1Report(mode, scores, counts)


def downsample(turns: Iterable[Turn]) -> list[Turn]:
    """Drop training turns in which every unit is neutral."""
    out = []
    for turn in turns:
        labels = [u.gold for u in turn.units]
        if any(lab is None for lab in labels):
            raise ValueError(f"turn {turn.id!r} has unlabeled units; downsampling needs gold labels")
        if any(lab is not OrdinalLabel.O for lab in labels):
            out.append(turn)
    return out


def polarity_counts(unit: TextUnit, lexicon: Lexicon) -> tuple[int, int]:
    """Occurrences of positive and negative lexicon entries in the unit."""
    by_key = {(e.unit_type, e.surface): e.score for e in lexicon}
    pos = neg = 0
    for key in sentence_units(unit, lexicon.sentiment_words()):
        s = by_key.get(key)
        if s is not None:
            if s > 0:
                pos += 1
            else:
                neg += 1
    return pos, neg


def polarity_baseline(unit: TextUnit, lexicon: Lexicon) -> Polarity3:
    pos, neg = polarity_counts(unit, lexicon)
    if pos > neg:
        return Polarity3.AGREEMENT
    if neg > pos:
        return Polarity3.DISAGREEMENT
    return Polarity3.NEUTRAL


# --------------------------------------------------------------------------- chi-square

class StatisticsError(ValueError):
    pass


def chi2_2x2(a: float, b: float, c: float, d: float) -> float:
    """Pearson chi-square of [[a, b], [c, d]] without continuity correction; 0 if a margin is empty."""
    n = a + b + c + d
    den = (a + b) * (c + d) * (a + c) * (b + d)
    if den == 0:
        return 0.0
    return n * (a * d - b * c) ** 2 / den


@dataclass(frozen=True)
class RankedFeature:
    feature: str
    chi2: float
    top_class: Hashable


def chi2_rank(features: Sequence[Iterable[str]], labels: Sequence[Hashable],
              classes: Sequence[Hashable] | None = None,
              per_class: bool = False) -> list[RankedFeature] | dict[Hashable, list[RankedFeature]]:
    """Rank features by one-vs-rest chi-square against each class.

    With ``per_class`` the result maps each class to its own ranking; otherwise
    each feature appears once with its largest statistic and the class it came from.
    Ties are broken by feature name.
    """
    if len(features) != len(labels):
        raise StatisticsError(f"{len(features)} examples but {len(labels)} labels")
    if classes is None:
        classes = CLASSES
        labels = [as_three_way(y) for y in labels]
    classes = list(classes)
    class_sizes = {c: 0 for c in classes}
    joint: dict[str, dict[Hashable, int]] = {}
    for feats, y in zip(features, labels):
        if y not in class_sizes:
            raise StatisticsError(f"label {y!r} not among classes {classes}")
        class_sizes[y] += 1
        for f in set(feats):
            joint.setdefault(f, {c: 0 for c in classes})[y] += 1
    empty = [c for c, n in class_sizes.items() if n == 0]
    if empty:
        raise StatisticsError(f"no examples for class(es) {empty}")
    n = len(labels)
    stats: dict[Hashable, list[RankedFeature]] = {c: [] for c in classes}
    for f, per in joint.items():
        present = sum(per.values())
        for c in classes:
            a = per[c]
            b = present - a
            cc = class_sizes[c] - a
            d = n - present - cc
            stats[c].append(RankedFeature(f, chi2_2x2(a, b, cc, d), c))
    if per_class:
        return {c: sorted(v, key=lambda r: (-r.chi2, r.feature)) for c, v in stats.items()}
    best: dict[str, RankedFeature] = {}
    for c in classes:
        for r in stats[c]:
            if r.feature not in best or r.chi2 > best[r.feature].chi2:
                best[r.feature] = r
    return sorted(best.values(), key=lambda r: (-r.chi2, r.feature))
