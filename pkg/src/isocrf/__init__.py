"""Ordinal (dis)agreement tagging with isotonic linear-chain CRFs.

The package covers the whole pipeline: corpus loading and label mapping,
feature extraction, CRF inference and training (optionally with monotone
constraints tied to a sentiment lexicon), lexicon induction by label
propagation, and evaluation.
"""

from .corpus import (LABELS, Discussion, OrdinalLabel, TextUnit, Turn, filter_discussions,
                     map_aawd_labels, map_iac_score, read_corpus)
from .crf import CrfModel, FeatureIndex, TrainConfig, forward_backward, objective_and_gradient, train, viterbi
from .evaluation import Polarity3, chi2_rank, collapse_labels, downsample, polarity_baseline, score
from .features import FeatureExtractor, FeatureGroupConfig, extract_features
from .isotonic import Lexicon, read_lexicon, reparameterize, verify_monotonicity, write_lexicon
from .lexicon import build_graph, build_lexicon, extract_text_units, load_seeds, propagate
from .tagger import Tagger, train_tagger

__version__ = "0.1.0"

__all__ = [
    "LABELS", "Discussion", "OrdinalLabel", "TextUnit", "Turn", "filter_discussions", "map_aawd_labels",
    "map_iac_score", "read_corpus", "CrfModel", "FeatureIndex", "TrainConfig", "forward_backward",
    "objective_and_gradient", "train", "viterbi", "Polarity3", "chi2_rank", "collapse_labels", "downsample",
    "polarity_baseline", "score", "FeatureExtractor", "FeatureGroupConfig", "extract_features", "Lexicon",
    "read_lexicon", "reparameterize", "verify_monotonicity", "write_lexicon", "build_graph", "build_lexicon",
    "extract_text_units", "load_seeds", "propagate", "Tagger", "train_tagger",
]
