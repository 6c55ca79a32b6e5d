"""Linear-chain CRF over the five ordinal labels.

The score of a label sequence ``y`` for observations ``x`` is

    sum_i transitions[y[i-1], y[i]]  +  sum_i sum_{w in x[i]} emissions[w, y[i]]

with no start/stop transitions. All inference runs in log space.
"""

from __future__ import annotations

import base64
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import minimize
from scipy.special import logsumexp

from .corpus import LABELS, OrdinalLabel
from .isotonic import (
    ConstraintGroup,
    IsotonicParameterization,
    Lexicon,
    PlainParameterization,
    build_constraints,
)

log = logging.getLogger(__name__)

K = len(LABELS)
MODEL_FORMAT = "isocrf-model"
MODEL_VERSION = 1


class TrainingError(RuntimeError):
    pass


class FeatureIndex:
    """Bidirectional feature-name <-> dense id map."""

    def __init__(self, names: Iterable[str] = ()):
        self.names: list[str] = []
        self._ids: dict[str, int] = {}
        for n in names:
            self.add(n)

    def add(self, name: str) -> int:
        fid = self._ids.get(name)
        if fid is None:
            fid = self._ids[name] = len(self.names)
            self.names.append(name)
        return fid

    def get(self, name: str) -> int | None:
        return self._ids.get(name)

    def __getitem__(self, name: str) -> int:
        return self._ids[name]

    def __contains__(self, name) -> bool:
        return name in self._ids

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_sequences(cls, sequences: Iterable[Sequence[Iterable[str]]]) -> "FeatureIndex":
        names = set()
        for seq in sequences:
            for obs in seq:
                names.update(obs)
        return cls(sorted(names))

    def encode(self, observation: Iterable[str]) -> np.ndarray:
        """Ids of the known features in one observation; unknown names are dropped."""
        ids = sorted({self._ids[n] for n in observation if n in self._ids})
        return np.array(ids, dtype=np.intp)


@dataclass
class CrfModel:
    feature_index: FeatureIndex
    transitions: np.ndarray  # (5, 5): [previous label, current label]
    emissions: np.ndarray  # (n_features, 5)
    constraints: tuple[ConstraintGroup, ...] = ()
    training_log: dict = field(default_factory=dict)

    labels = LABELS

    def __post_init__(self):
        self.transitions = np.asarray(self.transitions, dtype=float)
        self.emissions = np.asarray(self.emissions, dtype=float)
        if self.transitions.shape != (K, K):
            raise ValueError(f"transition weights must be {K}x{K}, got {self.transitions.shape}")
        if self.emissions.shape != (len(self.feature_index), K):
            raise ValueError(f"emission weights must be ({len(self.feature_index)}, {K}), got {self.emissions.shape}")
        if not (np.all(np.isfinite(self.transitions)) and np.all(np.isfinite(self.emissions))):
            raise ValueError("model weights must be finite")

    @classmethod
    def zeros(cls, feature_names: Iterable[str]) -> "CrfModel":
        index = FeatureIndex(feature_names)
        return cls(index, np.zeros((K, K)), np.zeros((len(index), K)))

    def node_scores(self, x: Sequence[Iterable[str]]) -> np.ndarray:
        """Log emission potentials, shape (n, 5)."""
        out = np.zeros((len(x), K))
        for i, obs in enumerate(x):
            ids = self.feature_index.encode(obs)
            if len(ids):
                out[i] = self.emissions[ids].sum(axis=0)
        return out

    def score(self, x: Sequence[Iterable[str]], y: Sequence[int]) -> float:
        return sequence_score(self.node_scores(x), self.transitions, y)


def sequence_score(node: np.ndarray, trans: np.ndarray, y: Sequence[int]) -> float:
    s = float(node[0, y[0]])
    for i in range(1, len(y)):
        s += float(trans[y[i - 1], y[i]]) + float(node[i, y[i]])
    return s


# --------------------------------------------------------------------------- inference

def _forward_backward_batch(node: np.ndarray, trans: np.ndarray):
    """Forward/backward tables for a batch of equal-length chains; node has shape (B, n, K)."""
    B, n, _ = node.shape
    alpha = np.empty_like(node)
    beta = np.empty_like(node)
    alpha[:, 0] = node[:, 0]
    for t in range(1, n):
        alpha[:, t] = logsumexp(alpha[:, t - 1, :, None] + trans[None], axis=1) + node[:, t]
    beta[:, n - 1] = 0.0
    for t in range(n - 2, -1, -1):
        beta[:, t] = logsumexp(trans[None] + (node[:, t + 1] + beta[:, t + 1])[:, None, :], axis=2)
    log_z = logsumexp(alpha[:, n - 1], axis=1)
    return alpha, beta, log_z


def _pair_marginals(alpha, beta, node, trans, log_z):
    """(B, n-1, K, K) pairwise marginals p(y[t]=a, y[t+1]=b)."""
    return np.exp(alpha[:, :-1, :, None] + trans[None, None]
                  + (node[:, 1:] + beta[:, 1:])[:, :, None, :] - log_z[:, None, None, None])


@dataclass
class Lattice:
    node_scores: np.ndarray
    log_alpha: np.ndarray
    log_beta: np.ndarray
    log_partition: float
    marginals: np.ndarray  # (n, 5)
    pair_marginals: np.ndarray  # (n-1, 5, 5)

    @property
    def length(self) -> int:
        return self.node_scores.shape[0]

    @property
    def log_partition_backward(self) -> float:
        return float(logsumexp(self.node_scores[0] + self.log_beta[0]))


def lattice_from_scores(node: np.ndarray, trans: np.ndarray) -> Lattice:
    node = np.asarray(node, dtype=float)
    if node.ndim != 2 or node.shape[0] == 0:
        raise ValueError("forward-backward needs a non-empty sequence")
    alpha, beta, log_z = _forward_backward_batch(node[None], trans)
    unary = np.exp(alpha[0] + beta[0] - log_z[0])
    pairs = _pair_marginals(alpha, beta, node[None], trans, log_z)[0]
    return Lattice(node, alpha[0], beta[0], float(log_z[0]), unary, pairs)


def forward_backward(model: CrfModel, x: Sequence[Iterable[str]]) -> Lattice:
    if len(x) == 0:
        raise ValueError("forward-backward needs a non-empty sequence")
    return lattice_from_scores(model.node_scores(x), model.transitions)


def viterbi_from_scores(node: np.ndarray, trans: np.ndarray) -> list[int]:
    """Highest-scoring label sequence; among ties, the lexicographically smallest in label order."""
    n = node.shape[0]
    if n == 0:
        raise ValueError("viterbi needs a non-empty sequence")
    # best[t, y]: best score of positions t..n-1 given y[t] = y
    best = np.empty_like(node)
    best[n - 1] = node[n - 1]
    for t in range(n - 2, -1, -1):
        best[t] = node[t] + np.max(trans + best[t + 1][None, :], axis=1)
    path = [int(np.argmax(best[0]))]
    for t in range(1, n):
        path.append(int(np.argmax(trans[path[-1]] + best[t])))
    return path


def viterbi(model: CrfModel, x: Sequence[Iterable[str]]) -> list[OrdinalLabel]:
    if len(x) == 0:
        raise ValueError("viterbi needs a non-empty sequence")
    return [LABELS[i] for i in viterbi_from_scores(model.node_scores(x), model.transitions)]


# --------------------------------------------------------------------------- training

@dataclass(frozen=True)
class TrainConfig:
    l2_variance: float = 10.0
    max_iterations: int = 300
    relative_tolerance: float = 1e-6
    patience: int = 5
    seed: int = 0
    init_scale: float = 0.01
    threads: int = 1

    def __post_init__(self):
        if not self.l2_variance > 0:
            raise ValueError("l2_variance must be > 0")
        if not self.relative_tolerance > 0:
            raise ValueError("relative_tolerance must be > 0")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")


def _label_ids(labels: Sequence) -> np.ndarray:
    out = []
    for y in labels:
        if isinstance(y, OrdinalLabel):
            out.append(int(y))
        elif isinstance(y, str):
            out.append(int(OrdinalLabel.parse(y)))
        elif isinstance(y, (int, np.integer)) and 0 <= int(y) < K:
            out.append(int(y))
        else:
            raise ValueError(f"label {y!r} is not one of the {K} ordinal labels")
    return np.array(out, dtype=np.intp)


class SequenceData:
    """Labeled sequences encoded against a feature index, bucketed by length."""

    def __init__(self, sequences: Sequence[Sequence[Iterable[str]]], labels: Sequence[Sequence],
                 feature_index: FeatureIndex):
        if len(sequences) != len(labels):
            raise ValueError(f"{len(sequences)} sequences but {len(labels)} label sequences")
        self.n_features = len(feature_index)
        rows, cols, gold, lengths = [], [], [], []
        pos = 0
        for x, y in zip(sequences, labels):
            if len(x) == 0:
                raise ValueError("empty sequence in training data")
            if len(x) != len(y):
                raise ValueError(f"sequence of length {len(x)} has {len(y)} labels")
            gold.append(_label_ids(y))
            for obs in x:
                ids = feature_index.encode(obs)
                rows.extend([pos] * len(ids))
                cols.extend(ids.tolist())
                pos += 1
            lengths.append(len(x))
        self.n_positions = pos
        self.lengths = np.array(lengths, dtype=np.intp)
        self.gold = np.concatenate(gold) if gold else np.zeros(0, dtype=np.intp)
        self.X = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(pos, self.n_features))
        starts = np.concatenate(([0], np.cumsum(self.lengths)[:-1])).astype(np.intp)
        self.buckets: list[np.ndarray] = []
        for n in sorted(set(lengths)):
            seq_ids = np.flatnonzero(self.lengths == n)
            self.buckets.append(starts[seq_ids][:, None] + np.arange(n)[None, :])
        onehot = np.zeros((pos, K))
        onehot[np.arange(pos), self.gold] = 1.0
        self.empirical_emissions = np.asarray(self.X.T @ onehot)
        self.empirical_transitions = np.zeros((K, K))
        for idx in self.buckets:
            if idx.shape[1] > 1:
                np.add.at(self.empirical_transitions,
                          (self.gold[idx[:, :-1]].ravel(), self.gold[idx[:, 1:]].ravel()), 1.0)


class CrfObjective:
    """Penalized log-likelihood and its gradient over a free parameter vector."""

    def __init__(self, data: SequenceData, parameterization: PlainParameterization,
                 l2_variance: float = 10.0, threads: int = 1):
        self.data = data
        self.param = parameterization
        self.l2_variance = l2_variance
        self.threads = max(1, int(threads))

    def _bucket(self, idx, node, trans):
        alpha, beta, log_z = _forward_backward_batch(node[idx], trans)
        unary = np.exp(alpha + beta - log_z[:, None, None])
        if idx.shape[1] > 1:
            pair = _pair_marginals(alpha, beta, node[idx], trans, log_z).sum(axis=(0, 1))
        else:
            pair = np.zeros((K, K))
        return float(log_z.sum()), unary, pair

    def unpenalized(self, trans, emit):
        d = self.data
        node = np.asarray(d.X @ emit)
        if self.threads > 1 and len(d.buckets) > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                parts = list(pool.map(lambda idx: self._bucket(idx, node, trans), d.buckets))
        else:
            parts = [self._bucket(idx, node, trans) for idx in d.buckets]
        unary_all = np.zeros_like(node)
        expected_trans = np.zeros((K, K))
        total_log_z = 0.0
        for idx, (lz, unary, pair) in zip(d.buckets, parts):
            total_log_z += lz
            unary_all[idx] = unary
            expected_trans += pair
        gold_score = (float(node[np.arange(d.n_positions), d.gold].sum())
                      + float((d.empirical_transitions * trans).sum()))
        value = gold_score - total_log_z
        g_trans = d.empirical_transitions - expected_trans
        g_emit = d.empirical_emissions - np.asarray(d.X.T @ unary_all)
        return value, g_trans, g_emit

    def __call__(self, z: np.ndarray) -> tuple[float, np.ndarray]:
        trans, emit = self.param.to_natural(z)
        value, g_trans, g_emit = self.unpenalized(trans, emit)
        value -= (float((trans * trans).sum()) + float((emit * emit).sum())) / (2.0 * self.l2_variance)
        g_trans = g_trans - trans / self.l2_variance
        g_emit = g_emit - emit / self.l2_variance
        return value, self.param.pullback(z, g_trans, g_emit)


def parameterization_for(model: CrfModel) -> PlainParameterization:
    n = len(model.feature_index)
    if model.constraints:
        return IsotonicParameterization(n, model.constraints)
    return PlainParameterization(n)


def objective_and_gradient(model: CrfModel, sequences, labels, config: TrainConfig = TrainConfig()):
    """Penalized log-likelihood at the model's weights and its gradient over the free parameters."""
    param = parameterization_for(model)
    data = SequenceData(sequences, labels, model.feature_index)
    objective = CrfObjective(data, param, config.l2_variance, config.threads)
    return objective(param.from_natural(model.transitions, model.emissions))


class _Monitor:
    def __init__(self, config: TrainConfig):
        self.config = config
        self.values: list[float] = []
        self.reason = "max_iterations"

    def __call__(self, intermediate_result):
        self.values.append(-float(intermediate_result.fun))
        p = self.config.patience
        if len(self.values) > p:
            old, new = self.values[-1 - p], self.values[-1]
            if abs(new - old) <= self.config.relative_tolerance * max(abs(new), 1.0):
                self.reason = "relative_change"
                raise StopIteration


def train(sequences: Sequence[Sequence[Iterable[str]]], labels: Sequence[Sequence],
          lexicon: Lexicon | None = None, config: TrainConfig = TrainConfig(),
          feature_index: FeatureIndex | None = None) -> CrfModel:
    """Maximum-likelihood CRF; isotonic when a lexicon is given.

    With a lexicon, the emission rows of lexicon-matched features are optimized
    through the squared-increment parameterization, so the returned weights
    satisfy the ordering constraints exactly.
    """
    if not sequences:
        raise ValueError("training needs at least one sequence")
    index = feature_index if feature_index is not None else FeatureIndex.from_sequences(sequences)
    groups = tuple(build_constraints(lexicon, index)) if lexicon is not None else ()
    param = IsotonicParameterization(len(index), groups) if lexicon is not None else PlainParameterization(len(index))
    data = SequenceData(sequences, labels, index)
    objective = CrfObjective(data, param, config.l2_variance, config.threads)

    rng = np.random.default_rng(config.seed)
    z0 = config.init_scale * rng.standard_normal(param.size)
    n_evals = 0

    def negated(z):
        nonlocal n_evals
        n_evals += 1
        with np.errstate(over="ignore", invalid="ignore"):
            value, grad = objective(z)
        if not (math.isfinite(value) and np.all(np.isfinite(grad))):
            raise TrainingError(f"non-finite objective after {n_evals} evaluations "
                                f"(value={value}, max|w|={np.max(np.abs(z)):.3g})")
        return -value, -grad

    monitor = _Monitor(config)
    result = minimize(negated, z0, jac=True, method="L-BFGS-B", callback=monitor,
                      options={"maxiter": config.max_iterations, "ftol": 1e-15, "gtol": 1e-10,
                               "maxcor": 20})
    if monitor.reason == "max_iterations" and result.nit < config.max_iterations:
        monitor.reason = f"optimizer: {result.message}"
    trans, emit = param.to_natural(result.x)
    final = -float(result.fun)
    log.info("trained CRF: %d features, %d constrained, %d iterations, objective %.6f (%s)",
             len(index), len(groups), result.nit, final, monitor.reason)
    return CrfModel(index, trans, emit, groups, {
        "iterations": int(result.nit),
        "objective": final,
        "trajectory": monitor.values,
        "stop_reason": monitor.reason,
        "free_parameters": int(param.size),
    })


# --------------------------------------------------------------------------- serialization

def _pack(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _unpack(obj: dict) -> np.ndarray:
    return np.frombuffer(base64.b64decode(obj["data"]), dtype="<f8").reshape(obj["shape"]).copy()


def model_to_dict(model: CrfModel) -> dict:
    return {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "labels": [lab.name for lab in LABELS],
        "features": list(model.feature_index.names),
        "transitions": _pack(model.transitions),
        "emissions": _pack(model.emissions),
        "constraints": [[g.feature, g.feature_id, g.direction] for g in model.constraints],
        "training": {k: v for k, v in model.training_log.items() if k != "trajectory"},
    }


def model_from_dict(obj: dict) -> CrfModel:
    if obj.get("format") != MODEL_FORMAT:
        raise ValueError("not an isocrf model file")
    if obj.get("version") != MODEL_VERSION:
        raise ValueError(f"unsupported model version {obj.get('version')}")
    if obj["labels"] != [lab.name for lab in LABELS]:
        raise ValueError(f"model label order {obj['labels']} does not match {[lab.name for lab in LABELS]}")
    groups = tuple(ConstraintGroup(f, int(i), int(d)) for f, i, d in obj["constraints"])
    return CrfModel(FeatureIndex(obj["features"]), _unpack(obj["transitions"]), _unpack(obj["emissions"]),
                    groups, dict(obj.get("training", {})))
