"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line."""

import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import scipy.sparse as sp

from isocrf.corpus import LABELS, Annotation, AnnotatedSpan, OrdinalLabel, TextUnit, Token, TurnAnnotation, \
    dump_corpus, map_aawd_labels, map_iac_score
from isocrf.crf import CrfModel, FeatureIndex, TrainConfig, forward_backward, objective_and_gradient, train, viterbi
from isocrf.evaluation import GoldItem, Polarity3, chi2_2x2, chi2_rank, polarity_baseline, score
from isocrf.isotonic import (ASCENDING, DESCENDING, ConstraintGroup, IsotonicParameterization, Lexicon, LexiconEntry,
                             PlainParameterization, invert_reparameterization, reparameterize, verify_monotonicity)
from isocrf.lexicon import SeedSet, UnitGraph, UnitNode, propagate
from isocrf.synthetic import planted_task, toy_corpus, toy_seed_lists

from conftest import ACCEPTANCE_LINES
from oracles import central_difference, chain_score, enumerate_chain, random_dataset


def record(name, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


# ----------------------------------------------------------------------------- 1

def test_criterion_1_inference_oracle():
    start = time.perf_counter()
    rng = np.random.default_rng(2024)
    names = [f"f{i}" for i in range(6)]
    worst_z = worst_m = 0.0
    viterbi_exact = True
    for trial in range(100):
        n = 1 + trial % 4
        model = CrfModel(FeatureIndex(names), rng.normal(0, 1.5, (5, 5)), rng.normal(0, 1.5, (6, 5)))
        x = [list(rng.choice(names, int(rng.integers(0, 4)), replace=False)) for _ in range(n)]
        node = model.node_scores(x)
        log_z, unary, pair, best, _, _ = enumerate_chain(node, model.transitions)
        lat = forward_backward(model, x)
        worst_z = max(worst_z, abs(lat.log_partition - log_z))
        worst_m = max(worst_m, float(np.max(np.abs(lat.marginals - unary))))
        if n > 1:
            worst_m = max(worst_m, float(np.max(np.abs(lat.pair_marginals - pair))))
        path = [int(y) for y in viterbi(model, x)]
        viterbi_exact &= chain_score(node, model.transitions, path) == best
    elapsed = time.perf_counter() - start
    ok = worst_z <= 1e-8 and worst_m <= 1e-10 and viterbi_exact and elapsed < 10
    record("criterion 1 inference oracle", ok,
           f"max|dlogZ|={worst_z:.2e} max|dmarg|={worst_m:.2e} viterbi_exact={viterbi_exact} time={elapsed:.2f}s")
    assert ok


# ----------------------------------------------------------------------------- 2

def test_criterion_2_gradient():
    start = time.perf_counter()
    worst = {False: 0.0, True: 0.0}
    for inst in range(20):
        rng = np.random.default_rng(100 + inst)
        names, seqs, labels = random_dataset(rng, n_features=8, n_sequences=5, max_len=5, active=3)
        index = FeatureIndex(names)
        for isotonic in (False, True):
            if isotonic:
                groups = tuple(ConstraintGroup(names[i], i, ASCENDING if i % 2 else DESCENDING) for i in range(3))
                param = IsotonicParameterization(len(index), groups)
            else:
                groups, param = (), PlainParameterization(len(index))

            def model_at(z):
                trans, emit = param.to_natural(z)
                return CrfModel(index, trans, emit, groups)

            z0 = rng.normal(0, 1, param.size)
            base = model_at(z0)
            z = param.from_natural(base.transitions, base.emissions)
            cfg = TrainConfig(l2_variance=10.0)
            _, grad = objective_and_gradient(base, seqs, labels, cfg)
            fd = central_difference(lambda v: objective_and_gradient(model_at(v), seqs, labels, cfg)[0], z, 1e-5)
            worst[isotonic] = max(worst[isotonic], float(np.max(np.abs(grad - fd) / np.abs(fd))))
    elapsed = time.perf_counter() - start
    ok = worst[False] <= 1e-4 and worst[True] <= 1e-4 and elapsed < 30
    record("criterion 2 gradient", ok,
           f"max relative error plain={worst[False]:.2e} isotonic={worst[True]:.2e} time={elapsed:.2f}s")
    assert ok


# ----------------------------------------------------------------------------- 3

def _monotone_datasets():
    rng = np.random.default_rng(7)
    for seed in range(3):
        task = planted_task(np.random.default_rng(seed), n_sequences=120, n_lexicon=20, n_topic=20)
        yield [task.features(i) for i in range(120)], task.labels, task.lexicon
    # adversarial: lexicon words appear with labels opposite to their polarity
    names, seqs, labels = random_dataset(rng, n_features=10, n_sequences=40, max_len=4, active=2)
    seqs = [[[f"lex:uni={w}" for w in obs] for obs in s] for s in seqs]
    lex = Lexicon([LexiconEntry("uni", f"f{i}", 0.5 if i % 2 else -0.5) for i in range(6)])
    yield seqs, labels, lex
    anti = [[["lex:uni=good"]]] * 10 + [[["lex:uni=bad"]]] * 10
    yield anti, [[0]] * 10 + [[4]] * 10, Lexicon([LexiconEntry("uni", "good", 1.0), LexiconEntry("uni", "bad", -1.0)])


def test_criterion_3_monotonicity():
    violations, groups = 0, 0
    for seqs, labels, lex in _monotone_datasets():
        model = train(seqs, labels, lex)
        groups += len(model.constraints)
        violations += len(verify_monotonicity(model, lex))
    rng = np.random.default_rng(3)
    worst = 0.0
    for i in range(50):
        direction = ASCENDING if i % 2 == 0 else DESCENDING
        w = np.sort(rng.normal(0, 3, 5))[::direction]
        if i % 5 == 0:
            w[2] = w[1]  # ties must be representable
        base, roots = invert_reparameterization(w, direction)
        worst = max(worst, float(np.max(np.abs(reparameterize(base, roots, direction) - w))))
    ok = violations == 0 and groups > 0 and worst <= 1e-12
    record("criterion 3 monotonicity", ok,
           f"violations={violations} over {groups} constrained features; round-trip max error={worst:.2e}")
    assert ok


# ----------------------------------------------------------------------------- 4

def _graph(names, edges):
    idx = {n: i for i, n in enumerate(names)}
    rows = [idx[a] for a, b, _ in edges] + [idx[b] for a, b, _ in edges]
    cols = [idx[b] for a, b, _ in edges] + [idx[a] for a, b, _ in edges]
    vals = [w for *_, w in edges] * 2
    return UnitGraph([UnitNode("uni", n, 10) for n in names],
                     sp.csr_matrix((vals, (rows, cols)), shape=(len(names), len(names))))


def test_criterion_4a_chain_example():
    g = _graph(["good", "a", "b"], [("good", "a", 1.0), ("a", "b", 1.0)])
    y = propagate(g, SeedSet(frozenset({"good"}), frozenset()), 2).scores
    ok = y[1] == 0.75 and y[2] == 0.5
    record("criterion 4 propagation chain example", ok,
           f"T=2 gives a={y[1]}, b={y[2]} (expected a=0.75, b=0.5)")
    assert ok


def test_criterion_4b_propagation_invariants():
    rng = np.random.default_rng(44)
    bounded = clamped = symmetric = True
    for _ in range(100):
        n = int(rng.integers(2, 51))
        dense = rng.random((n, n)) * (rng.random((n, n)) < 0.15)
        dense = np.triu(dense, 1)
        g = UnitGraph([UnitNode("uni", f"w{i}", 10) for i in range(n)], sp.csr_matrix(dense + dense.T))
        picks = rng.permutation(n)[: max(2, n // 4)]
        half = max(1, len(picks) // 2)
        seeds = SeedSet(frozenset(f"w{i}" for i in picks[:half]), frozenset(f"w{i}" for i in picks[half:]))
        T = int(rng.integers(1, 12))
        for t in range(1, T + 1):
            y = propagate(g, seeds, t).scores
            bounded &= bool(np.all(np.abs(y) <= 1.0))
            clamped &= all(y[g.index[("uni", w)]] == 1.0 for w in seeds.positive)
            clamped &= all(y[g.index[("uni", w)]] == -1.0 for w in seeds.negative)
        symmetric &= bool(np.array_equal(propagate(g, seeds.swapped(), T).scores, -propagate(g, seeds, T).scores))
    ok = bounded and clamped and symmetric
    record("criterion 4 propagation invariants", ok,
           f"100 random graphs: bounded={bounded} clamped={clamped} sign_symmetric={symmetric}")
    assert ok


# ----------------------------------------------------------------------------- 5

def test_criterion_5_synthetic_end_to_end():
    start = time.perf_counter()
    wins, beats, rows = 0, 0, []
    for rep in range(10):
        task = planted_task(np.random.default_rng(rep), n_sequences=500)
        train_idx, test_idx = range(400), range(400, 500)
        xs = [task.features(i) for i in train_idx]
        ys = [task.labels[i] for i in train_idx]
        cfg = TrainConfig(seed=rep)
        plain = train(xs, ys, None, cfg)
        iso = train(xs, ys, task.lexicon, cfg)
        gold = [GoldItem(LABELS[y]) for i in test_idx for y in task.labels[i]]

        def macro(model):
            return score(gold, [lab for i in test_idx for lab in viterbi(model, task.features(i))]).macro_f1

        f_plain, f_iso = macro(plain), macro(iso)
        f_base = score(gold, [polarity_baseline(u, task.lexicon) for i in test_idx
                              for u in task.units(i)]).macro_f1
        wins += f_iso >= f_plain
        beats += f_plain > f_base and f_iso > f_base
        rows.append(f"{f_iso:.3f}/{f_plain:.3f}/{f_base:.3f}")
    elapsed = time.perf_counter() - start
    ok = wins >= 7 and beats == 10 and elapsed < 300
    record("criterion 5 synthetic end-to-end", ok,
           f"isotonic>=plain in {wins}/10, both>baseline in {beats}/10, time={elapsed:.1f}s "
           f"(iso/plain/baseline macro-F1: {' '.join(rows)})")
    assert ok


# ----------------------------------------------------------------------------- 6

IAC_EXPECTED = {-5: "NN", -3: "NN", -2.99: "N", -1: "N", 0: "O", 1: "P", 2.99: "P", 3: "PP", 5: "PP"}


def _aawd(spans=(), turn=()):
    ann = Annotation(tuple(AnnotatedSpan(a, p, 0, 4) for a, p in spans), tuple(TurnAnnotation(a, p) for a, p in turn))
    return TextUnit("unit", (Token("unit", "NN"),), annotation=ann)


AAWD_CASES = [
    ("agreement spans from two annotators", _aawd([("a", 1), ("b", 1)]), "PP"),
    ("agreement span from one annotator", _aawd([("a", 1)]), "P"),
    ("agreement inherited from turn level", _aawd(turn=[("a", 1)]), "P"),
    ("disagreement spans from two annotators", _aawd([("a", -1), ("b", -1)]), "NN"),
    ("disagreement span from one annotator", _aawd([("a", -1)]), "N"),
    ("disagreement inherited from turn level", _aawd(turn=[("a", -1)]), "N"),
    ("both agreement and disagreement", _aawd([("a", 1), ("b", -1)]), "O"),
    ("no annotation", _aawd(), "O"),
]


def test_criterion_6_label_mapping():
    bad = [f"iac {s}" for s, lab in IAC_EXPECTED.items() if map_iac_score(s) is not OrdinalLabel[lab]]
    bad += [name for name, unit, lab in AAWD_CASES if map_aawd_labels(unit) is not OrdinalLabel[lab]]
    ok = not bad
    record("criterion 6 label mapping", ok,
           f"{len(IAC_EXPECTED)} IAC boundaries and {len(AAWD_CASES)} AAWD cases; mismatches={bad or 'none'}")
    assert ok


# ----------------------------------------------------------------------------- 7

def test_criterion_7_metric_oracle():
    A, D, O = Polarity3.AGREEMENT, Polarity3.DISAGREEMENT, Polarity3.NEUTRAL
    checks = []
    strict = score([GoldItem(A), GoldItem(D), GoldItem(O)], [A, O, O], "strict")
    checks += [abs(strict[A].f1 - 1.0), abs(strict[D].f1 - 0.0), abs(strict[O].precision - 0.5),
               abs(strict[O].recall - 1.0), abs(strict[O].f1 - 2 / 3)]
    soft = score([GoldItem(A), GoldItem(D, turn_inherited=True), GoldItem(O)], [A, O, O], "soft")
    c = soft.counts
    checks += [float(c.tp[D] + c.fp[D] + c.fn[D]), abs(c.tp[O] - 2.0), abs(soft[O].f1 - 1.0)]
    checks.append(abs(chi2_2x2(40, 10, 10, 40) - 36.0))
    checks.append(abs(chi2_2x2(10, 10, 10, 10) - 0.0))
    n = 20
    ranked = chi2_rank([["f"] if i < n // 2 else [] for i in range(n)], ["x"] * (n // 2) + ["y"] * (n // 2),
                       classes=["x", "y"])
    checks.append(abs(ranked[0].chi2 - n))
    worst = max(checks)
    ok = worst <= 1e-12
    record("criterion 7 metric oracle", ok, f"{len(checks)} hand-computed values, max deviation={worst:.1e}")
    assert ok


# ----------------------------------------------------------------------------- 8

def _pipeline(workdir: Path, hash_seed: str):
    env = dict(os.environ, PYTHONHASHSEED=hash_seed, ISOCRF_THREADS="2")
    d = workdir / "d.jsonl"
    with open(d, "w", encoding="utf-8") as fh:
        dump_corpus(toy_corpus(0, n_discussions=20), fh)
    for name, text in toy_seed_lists().items():
        (workdir / f"{name}.txt").write_text(text, encoding="utf-8")
    steps = [
        ["lexicon-build", "--corpus", "d.jsonl", "--seeds-mpqa", "mpqa.txt", "--seeds-gi", "gi.txt",
         "--seeds-swn", "swn.txt", "--iters", "10", "--theta", "0.2", "--min-discussions", "3", "--out", "lex.tsv"],
        ["train", "--corpus", "d.jsonl", "--lexicon", "lex.tsv", "--isotonic", "--seed", "3", "--out", "m.bin"],
        ["tag", "--model", "m.bin", "--corpus", "d.jsonl", "--out", "p.tsv"],
        ["eval", "--gold", "d.jsonl", "--pred", "p.tsv", "--mode", "soft", "--out", "r.tsv"],
    ]
    for argv in steps:
        proc = subprocess.run([sys.executable, "-m", "isocrf", *argv], cwd=workdir, env=env,
                              capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
    return {name: (workdir / name).read_bytes() for name in ("lex.tsv", "m.bin", "p.tsv", "r.tsv")}


def test_criterion_8_determinism(tmp_path):
    (tmp_path / "one").mkdir()
    (tmp_path / "two").mkdir()
    first = _pipeline(tmp_path / "one", "1")
    second = _pipeline(tmp_path / "two", "987")
    differing = [name for name in first if first[name] != second[name]]
    ok = not differing and all(first.values())
    record("criterion 8 determinism", ok,
           f"artifacts {sorted(first)} bit-identical across two runs; differing={differing or 'none'}")
    assert ok
