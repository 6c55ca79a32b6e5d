import math

import pytest
from hypothesis import given, strategies as st

from isocrf._text import ConfigError, is_word
from isocrf.corpus import Discussion, Turn
from isocrf.features import (FAMILIES, BinSpec, FeatureExtractor, FeatureGroupConfig, FeatureStats, FeatureVector,
                             TfidfTable, UnitContext, extract_features, parse_families, quote_overlap,
                             standardize_and_bin, strip_quotes, turn_contexts)
from isocrf.isotonic import Lexicon, LexiconEntry
from conftest import make_unit

LEX = Lexicon([LexiconEntry("uni", "wrong", -0.9), LexiconEntry("uni", "great", 0.8)])


def all_families(**kw):
    return FeatureGroupConfig(frozenset(FAMILIES), lexicon=LEX, **kw)


def you_are_wrong():
    return make_unit(["You", "are", "wrong", "!!"], ["PRP", "VBP", "ADJ", "."], arcs=[("nsubj", 2, 0)],
                     text="You are wrong !!")


def test_generalized_dependency_features():
    fv = extract_features(you_are_wrong(), UnitContext(), all_families(), FeatureStats())
    assert "syn:nsubj(ADJ,you)" in fv
    assert "syn:nsubj(wrong,PRP)" in fv
    assert "syn:nsubj(wrong,you)" in fv
    assert "syn:Rel(wrong,you)" in fv


def test_sentiment_dependency_substitution():
    fv = extract_features(you_are_wrong(), UnitContext(), all_families(), FeatureStats())
    assert "sent:nsubj(SentiWord_neg,you)" in fv
    assert "sent:Rel(SentiWord_neg,you)" in fv
    assert "sent:word=wrong" in fv and "sent:has_neg" in fv
    assert "sent:has_pos" not in fv


def test_initial_ngrams():
    fv = extract_features(make_unit(["So", "what", "?"]), UnitContext(), all_families(), FeatureStats())
    assert {"disc:init_uni=so", "disc:init_bi=so_what", "disc:init_tri=so_what_?"} <= set(fv)


def test_lexical_and_punctuation():
    fv = extract_features(you_are_wrong(), UnitContext(), all_families(), FeatureStats())
    assert {"lex:uni=you", "lex:bi=you are", "lex:bi=wrong !!", "disc:rep_punct=!"} <= set(fv)
    assert "syn:uni_pos=wrong/ADJ" in fv
    single = extract_features(make_unit(["ok", "!"]), UnitContext(), all_families(), FeatureStats())
    assert not single.family("disc:rep_punct")


def test_hedges_and_connectives():
    unit = make_unit(["perhaps", "great", "but", "wrong"])
    cfg = all_families(connective_window=1)
    fv = extract_features(unit, UnitContext(), cfg, FeatureStats())
    assert "disc:hedge" in fv and "disc:hedge=perhaps" in fv
    assert "sent:conn=but+great" in fv and "sent:conn=but+wrong" in fv
    far = make_unit(["great", "x", "y", "but"])
    assert "sent:conn=but+great" not in extract_features(far, UnitContext(), cfg, FeatureStats())
    assert "sent:conn=but+great" in extract_features(far, UnitContext(), all_families(), FeatureStats())


def test_all_weights_one():
    fv = extract_features(you_are_wrong(), UnitContext(), all_families(), FeatureStats())
    assert set(fv.values()) == {1.0}
    assert len(set(fv)) == len(fv)


@pytest.mark.parametrize("z,bin_", [(0.0, 3), (2.0, 5), (-1.5, 1), (-1.4999, 2), (-0.5, 2), (0.5, 3),
                                    (0.5001, 4), (1.5, 4), (1.50001, 5), (-9, 1)])
def test_binning(z, bin_):
    assert standardize_and_bin(10 + 2 * z, BinSpec(10, 2)) == bin_


def test_binning_errors():
    with pytest.raises(ValueError):
        BinSpec(0, 0)
    with pytest.raises(ValueError):
        standardize_and_bin(float("nan"), BinSpec(0, 1))


def test_sentiment_needs_lexicon():
    with pytest.raises(ConfigError):
        FeatureGroupConfig(frozenset(FAMILIES))
    FeatureGroupConfig(frozenset(FAMILIES) - {"sent"})


def test_missing_resource_file(tmp_path):
    with pytest.raises(ConfigError):
        FeatureGroupConfig.from_paths(("lex",), hedges=tmp_path / "nope.txt")


def test_resource_files(tmp_path):
    p = tmp_path / "neg.txt"
    p.write_text("# negators\nnever\n\nnope\n")
    cfg = FeatureGroupConfig.from_paths("lexical,discourse", negators=p)
    assert cfg.negators == frozenset({"never", "nope"})
    assert cfg.families == frozenset({"lex", "disc"})
    with pytest.raises(ConfigError):
        parse_families("lex,bogus")


def _corpus_examples(toy):
    return [pair for d in toy for _, items in turn_contexts(d) for pair in items]


def test_ablation_removes_only_family(toy):
    examples = _corpus_examples(toy)
    full = FeatureExtractor(all_families()).fit(examples)
    for fam in FAMILIES:
        kept = frozenset(FAMILIES) - {fam}
        cfg = FeatureGroupConfig(kept, lexicon=LEX if "sent" in kept else None)
        ablated = FeatureExtractor(cfg, full.stats)
        for unit, ctx in examples[:40]:
            a, b = full.extract(unit, ctx), ablated.extract(unit, ctx)
            assert set(b) == {n for n in a if not n.startswith(fam + ":")}


def test_extraction_deterministic(toy):
    examples = _corpus_examples(toy)
    ex1 = FeatureExtractor(all_families()).fit(examples)
    ex2 = FeatureExtractor.from_dict(ex1.to_dict())
    for unit, ctx in examples:
        assert ex1.extract(unit, ctx) == ex2.extract(unit, ctx)


def test_one_bin_per_quantity(toy):
    examples = _corpus_examples(toy)
    ex = FeatureExtractor(all_families()).fit(examples)
    assert set(ex.stats.bins) >= {"lex:words", "conv:tfidf"}
    for unit, ctx in examples:
        fv = ex.extract(unit, ctx)
        for q in ex.stats.bins:
            hits = [n for n in fv if n.startswith(q + "=bin")]
            expected = 0 if q.startswith("conv:") and ctx.target is None else 1
            assert len(hits) == expected


def test_conversation_features_skip_roots(toy):
    examples = _corpus_examples(toy)
    ex = FeatureExtractor(all_families()).fit(examples)
    root_unit, root_ctx = examples[0]
    assert root_ctx.target is None
    assert not ex.extract(root_unit, root_ctx).family("conv")


def test_bin_stats_are_frozen(toy):
    examples = _corpus_examples(toy)
    ex = FeatureExtractor(all_families()).fit(examples[:50])
    spec = ex.stats.bins["lex:words"]
    values = [sum(1 for t in u.tokens if is_word(t.form)) for u, _ in examples[:50]]
    mean = sum(values) / len(values)
    assert spec.mean == pytest.approx(mean)
    assert spec.stdev == pytest.approx(math.sqrt(sum((v - mean) ** 2 for v in values) / len(values)))


def test_quotes():
    target = Turn("t0", "a", (make_unit(["the", "war", "began", "early"]),))
    unit = make_unit(["no"], text='"the war began" no', quotes=[(0, 15)])
    assert strip_quotes(unit).strip() == "no"
    assert quote_overlap(unit, target) == 3
    assert quote_overlap(unit, None) == 0
    other = make_unit(["no"], text='"peace now" no', quotes=[(0, 11)])
    assert quote_overlap(other, target) == 0


def test_tfidf_hand_values():
    table = TfidfTable.fit(["a b", "a c", "d"])
    assert table.idf("a") == pytest.approx(math.log(4 / 3) + 1)
    assert table.idf("zzz") == pytest.approx(math.log(4) + 1)
    ia, ib, ic = table.idf("a"), table.idf("b"), table.idf("c")
    expected = ia * ia / (math.hypot(ia, ib) * math.hypot(ia, ic))
    assert table.similarity("a b", "a c") == pytest.approx(expected, abs=1e-15)


texts = st.lists(st.sampled_from(["war", "peace", "agree", "no", "yes", "the"]), max_size=6).map(" ".join)


@given(texts, texts)
def test_tfidf_properties(a, b):
    table = TfidfTable.fit(["war peace", "the no", "agree", "yes the war"])
    s = table.similarity(a, b)
    assert 0.0 <= s <= 1.0
    assert s == table.similarity(b, a)
    if a.strip():
        assert table.similarity(a, a) == pytest.approx(1.0, abs=1e-12)
    if not set(a.split()) & set(b.split()):
        assert s == 0.0


def test_feature_vector_mapping():
    fv = FeatureVector(["b", "a", "a"])
    assert list(fv) == ["a", "b"] and fv["a"] == 1.0 and len(fv) == 2
    with pytest.raises(KeyError):
        fv["c"]
    assert fv == FeatureVector(["a", "b"]) and hash(fv) == hash(FeatureVector(["b", "a"]))


def test_turn_contexts_targets():
    t0 = Turn("t0", "a", (make_unit(["x"]),))
    t1 = Turn("t1", "b", (make_unit(["y"]), make_unit(["z"])), "t0")
    pairs = list(turn_contexts(Discussion("d", (t0, t1))))
    assert pairs[0][1][0][1].target is None
    assert [c.position for _, c in pairs[1][1]] == [0, 1]
    assert pairs[1][1][1][1].target is t0
