"""Command-line entry point.

Exit codes: 0 success, 2 unknown subcommand, 64 usage error (missing or
conflicting flags), 65 bad input data, 66 unreadable input path,
70 training failure, 73 output cannot be written.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from ._text import ConfigError
from .corpus import CorpusError, OrdinalLabel, filter_discussions, read_corpus
from .crf import TrainConfig, TrainingError
from .evaluation import GoldItem, as_three_way, chi2_rank, collapse_labels, polarity_baseline, score
from .evaluation import StatisticsError
from .corpus import is_turn_inherited
from .features import FAMILIES, FeatureExtractor, FeatureGroupConfig, parse_families, turn_contexts
from .isotonic import read_lexicon, write_lexicon
from .lexicon import build_lexicon, load_seeds
from .tagger import PREDICTION_HEADER, Tagger, train_tagger

EXIT_OK = 0
EXIT_UNKNOWN_COMMAND = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_NO_INPUT = 66
EXIT_TRAINING = 70
EXIT_CANT_CREATE = 73

COMMANDS = ("lexicon-build", "train", "tag", "eval", "features", "baseline")
THREADS_ENV = "ISOCRF_THREADS"

log = logging.getLogger("isocrf")


class CliError(Exception):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.code = code


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise CliError(f"{self.prog}: {message}", EXIT_USAGE)


def _add_feature_flags(p):
    p.add_argument("--families", default=None,
                   help=f"comma-separated feature families from {','.join(FAMILIES)} "
                        "(default: all; 'sent' only when a lexicon is given)")
    p.add_argument("--hedges", help="hedge word list (one entry per line)")
    p.add_argument("--negators", help="negator word list")
    p.add_argument("--connectives", help="discourse connective list")
    p.add_argument("--window", type=int, default=3,
                   help="max token distance between a connective and a sentiment word (default 3)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="isocrf", description="Ordinal (dis)agreement tagging with isotonic CRFs.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    p = sub.add_parser("lexicon-build", help="propagate seed polarity over a text-unit graph")
    p.add_argument("--corpus", required=True, help="JSONL discussions (unlabeled is fine)")
    p.add_argument("--seeds-mpqa", help="MPQA-style TSV: word, polarity")
    p.add_argument("--seeds-gi", help="General-Inquirer-style list: WORD tag tag ...")
    p.add_argument("--seeds-swn", help="SentiWordNet-style TSV: word, pos_score, neg_score")
    p.add_argument("--iters", type=int, default=10, help="propagation iterations T (default 10)")
    p.add_argument("--theta", type=float, default=0.2, help="|score| cutoff for the lexicon (default 0.2)")
    p.add_argument("--min-discussions", type=int, default=10,
                   help="keep text units seen in at least this many discussions (default 10)")
    p.add_argument("--min-participants", type=int, default=5,
                   help="drop discussions with fewer distinct speakers (default 5)")
    p.add_argument("--top-k", type=int, default=50, help="PMI vector length (default 50)")
    p.add_argument("--out", required=True, help="output lexicon TSV")

    p = sub.add_parser("train", help="train a CRF tagger")
    p.add_argument("--corpus", required=True, help="labeled JSONL discussions")
    p.add_argument("--lexicon", help="sentiment lexicon TSV (sentiment features and constraints)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--isotonic", action="store_true", help="constrain lexicon-tied weights (needs --lexicon)")
    mode.add_argument("--plain", action="store_true", help="train an unconstrained CRF (default)")
    p.add_argument("--downsample", action="store_true", help="drop all-neutral turns from training")
    p.add_argument("--l2-variance", type=float, default=10.0)
    p.add_argument("--max-iter", type=int, default=300)
    p.add_argument("--tol", type=float, default=1e-6, help="relative objective change over 5 iterations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help=f"worker threads (default: ${THREADS_ENV} or all cores)")
    _add_feature_flags(p)
    p.add_argument("--out", required=True, help="model file")

    p = sub.add_parser("tag", help="label every unit of a corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default="-", help="predictions TSV (default stdout)")

    p = sub.add_parser("eval", help="score predictions against gold labels")
    p.add_argument("--gold", required=True, help="labeled JSONL discussions")
    p.add_argument("--pred", required=True, help="predictions TSV from 'tag' or 'baseline'")
    p.add_argument("--mode", choices=("strict", "soft"), default="strict")
    p.add_argument("--out", help="write the report TSV here")

    p = sub.add_parser("features", help="dump extracted features (and optionally a chi-square ranking)")
    p.add_argument("--corpus", required=True)
    p.add_argument("--lexicon", help="sentiment lexicon TSV")
    _add_feature_flags(p)
    p.add_argument("--out", default="-", help="feature dump TSV (default stdout)")
    p.add_argument("--chi2", help="also write a chi-square feature ranking TSV here (needs gold labels)")

    p = sub.add_parser("baseline", help="lexicon word-counting baseline")
    p.add_argument("--lexicon", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--out", default="-", help="3-way predictions TSV (default stdout)")
    return ap


# --------------------------------------------------------------------------- helpers

def _readable(path: str | None, what: str) -> None:
    if path is None:
        return
    if not os.path.isfile(path) or not os.access(path, os.R_OK):
        raise CliError(f"cannot read {what}: {path}", EXIT_NO_INPUT)


def _writable(path: str | None) -> None:
    if path is None or path == "-":
        return
    parent = Path(path).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise CliError(f"cannot write {path}: directory missing or not writable", EXIT_CANT_CREATE)


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline="\n"), True


def _summary(payload: dict, data_on_stdout: bool) -> None:
    stream = sys.stderr if data_on_stdout else sys.stdout
    stream.write(json.dumps(payload, sort_keys=True) + "\n")


def _threads(flag: int | None) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise CliError(f"{THREADS_ENV} must be an integer, got {env!r}", EXIT_USAGE) from None
    return os.cpu_count() or 1


def _feature_config(args, lexicon) -> FeatureGroupConfig:
    if args.families is None:
        families = set(FAMILIES) if lexicon is not None else set(FAMILIES) - {"sent"}
    else:
        families = parse_families(args.families)
        if "sent" in families and lexicon is None:
            raise CliError("the 'sent' feature family needs --lexicon", EXIT_USAGE)
    return FeatureGroupConfig.from_paths(families, hedges=args.hedges, negators=args.negators,
                                         connectives=args.connectives, lexicon=lexicon,
                                         connective_window=args.window)


# --------------------------------------------------------------------------- commands

def cmd_lexicon_build(args) -> int:
    if not (args.seeds_mpqa or args.seeds_gi or args.seeds_swn):
        raise CliError("lexicon-build needs at least one of --seeds-mpqa/--seeds-gi/--seeds-swn", EXIT_USAGE)
    for path, what in ((args.corpus, "corpus"), (args.seeds_mpqa, "MPQA seeds"),
                       (args.seeds_gi, "GI seeds"), (args.seeds_swn, "SentiWordNet seeds")):
        _readable(path, what)
    _writable(args.out)
    if args.iters < 1 or not args.theta > 0:
        raise CliError("--iters must be >= 1 and --theta > 0", EXIT_USAGE)
    corpus = read_corpus(args.corpus)
    kept = filter_discussions(corpus, args.min_participants)
    seeds = load_seeds(args.seeds_mpqa, args.seeds_gi, args.seeds_swn)
    lexicon, graph, prop = build_lexicon(kept, seeds, args.iters, args.theta, args.min_discussions, args.top_k)
    write_lexicon(lexicon, args.out)
    _summary({"command": "lexicon-build", "discussions": len(kept), "discussions_dropped": len(corpus) - len(kept),
              "seeds_positive": len(seeds.positive), "seeds_negative": len(seeds.negative),
              "nodes": len(graph.nodes), "edges": graph.n_edges, "iterations": args.iters, "theta": args.theta,
              "positive": len(lexicon.positive), "negative": len(lexicon.negative),
              "final_change": prop.max_change[-1] if prop.max_change else 0.0, "out": args.out}, False)
    return EXIT_OK


def cmd_train(args) -> int:
    if args.isotonic and not args.lexicon:
        raise CliError("--isotonic needs --lexicon", EXIT_USAGE)
    for path, what in ((args.corpus, "corpus"), (args.lexicon, "lexicon"), (args.hedges, "hedge list"),
                       (args.negators, "negator list"), (args.connectives, "connective list")):
        _readable(path, what)
    _writable(args.out)
    lexicon = read_lexicon(args.lexicon) if args.lexicon else None
    fconfig = _feature_config(args, lexicon)
    try:
        tconfig = TrainConfig(l2_variance=args.l2_variance, max_iterations=args.max_iter,
                              relative_tolerance=args.tol, seed=args.seed, threads=_threads(args.threads))
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE) from exc
    corpus = read_corpus(args.corpus)
    tagger = train_tagger(corpus, fconfig, lexicon if args.isotonic else None, tconfig, args.downsample)
    tagger.save(args.out)
    m = tagger.model
    _summary({"command": "train", "isotonic": bool(args.isotonic), "features": len(m.feature_index),
              "constrained": len(m.constraints), "iterations": m.training_log.get("iterations"),
              "objective": m.training_log.get("objective"), "stop_reason": m.training_log.get("stop_reason"),
              "out": args.out}, False)
    return EXIT_OK


def cmd_tag(args) -> int:
    _readable(args.model, "model")
    _readable(args.corpus, "corpus")
    _writable(args.out)
    tagger = Tagger.load(args.model)
    corpus = read_corpus(args.corpus)
    out, close = _open_out(args.out)
    n = 0
    try:
        out.write(PREDICTION_HEADER + "\n")
        for pred in tagger.tag(corpus):
            out.write(pred.tsv_row() + "\n")
            n += 1
    finally:
        if close:
            out.close()
    _summary({"command": "tag", "units": n, "discussions": len(corpus), "out": args.out}, not close)
    return EXIT_OK


def read_predictions(path) -> dict[tuple[str, str, int], str]:
    with open(path, encoding="utf-8") as fh:
        lines = [line.rstrip("\n") for line in fh if line.strip()]
    if not lines:
        raise CorpusError(f"{path}: empty predictions file")
    header = lines[0].split("\t")
    try:
        d_col, t_col, i_col = (header.index(c) for c in ("discussion_id", "turn_id", "unit_index"))
    except ValueError:
        raise CorpusError(f"{path}: header must name discussion_id, turn_id, unit_index", 1) from None
    label_col = header.index("label_5way") if "label_5way" in header else (
        header.index("label_3way") if "label_3way" in header else None)
    if label_col is None:
        raise CorpusError(f"{path}: header needs label_5way or label_3way", 1)
    out = {}
    for lineno, line in enumerate(lines[1:], start=2):
        row = line.split("\t")
        try:
            out[(row[d_col], row[t_col], int(row[i_col]))] = row[label_col]
        except (IndexError, ValueError) as exc:
            raise CorpusError(f"{path}: malformed row", lineno) from exc
    return out


def cmd_eval(args) -> int:
    _readable(args.gold, "gold corpus")
    _readable(args.pred, "predictions")
    _writable(args.out)
    corpus = read_corpus(args.gold)
    preds = read_predictions(args.pred)
    gold, pred = [], []
    for d in corpus:
        for turn in d.turns:
            for i, unit in enumerate(turn.units):
                if unit.gold is None:
                    continue
                key = (d.id, turn.id, i)
                if key not in preds:
                    raise CorpusError(f"no prediction for unit {key}")
                try:
                    pred.append(as_three_way(preds[key]))
                except ValueError as exc:
                    raise CorpusError(f"bad predicted label for {key}: {exc}") from exc
                gold.append(GoldItem(unit.gold, is_turn_inherited(unit)))
    report = score(gold, pred, args.mode)
    if args.out:
        Path(args.out).write_text(report.to_tsv(), encoding="utf-8")
    print(report.to_table())
    _summary({"command": "eval", "mode": args.mode, "units": len(gold), "macro_f1": report.macro_f1,
              **{f"f1_{c.value}": s.f1 for c, s in report.scores.items()}, "out": args.out}, False)
    return EXIT_OK


def cmd_features(args) -> int:
    for path, what in ((args.corpus, "corpus"), (args.lexicon, "lexicon"), (args.hedges, "hedge list"),
                       (args.negators, "negator list"), (args.connectives, "connective list")):
        _readable(path, what)
    _writable(args.out)
    _writable(args.chi2)
    lexicon = read_lexicon(args.lexicon) if args.lexicon else None
    extractor = FeatureExtractor(_feature_config(args, lexicon))
    corpus = read_corpus(args.corpus)
    turns = [(d, turn, items) for d in corpus for turn, items in turn_contexts(d)]
    extractor.fit(pair for _, _, items in turns for pair in items)
    out, close = _open_out(args.out)
    vectors, labels, n_rows = [], [], 0
    try:
        for d, turn, items in turns:
            for i, (unit, ctx) in enumerate(items):
                fv = extractor.extract(unit, ctx)
                for name in fv:
                    out.write(f"{d.id}/{turn.id}/{i}\t{name}\n")
                    n_rows += 1
                if unit.gold is not None:
                    vectors.append(fv.names)
                    labels.append(collapse_labels(unit.gold))
    finally:
        if close:
            out.close()
    summary = {"command": "features", "units": sum(len(items) for _, _, items in turns), "rows": n_rows,
               "out": args.out}
    if args.chi2:
        ranking = chi2_rank(vectors, labels)
        with open(args.chi2, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("rank\tfeature\tchi2\ttop_class\n")
            for rank, r in enumerate(ranking, start=1):
                fh.write(f"{rank}\t{r.feature}\t{r.chi2!r}\t{r.top_class.value}\n")
        summary["chi2"] = args.chi2
    _summary(summary, not close)
    return EXIT_OK


def cmd_baseline(args) -> int:
    _readable(args.lexicon, "lexicon")
    _readable(args.corpus, "corpus")
    _writable(args.out)
    lexicon = read_lexicon(args.lexicon)
    corpus = read_corpus(args.corpus)
    out, close = _open_out(args.out)
    n = 0
    try:
        out.write("discussion_id\tturn_id\tunit_index\tlabel_3way\n")
        for d in corpus:
            for turn in d.turns:
                for i, unit in enumerate(turn.units):
                    out.write(f"{d.id}\t{turn.id}\t{i}\t{polarity_baseline(unit, lexicon).value}\n")
                    n += 1
    finally:
        if close:
            out.close()
    _summary({"command": "baseline", "units": n, "out": args.out}, not close)
    return EXIT_OK


HANDLERS = {
    "lexicon-build": cmd_lexicon_build,
    "train": cmd_train,
    "tag": cmd_tag,
    "eval": cmd_eval,
    "features": cmd_features,
    "baseline": cmd_baseline,
}


def run(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    positional = [a for a in argv if not a.startswith("-")]
    if positional and positional[0] not in COMMANDS and argv[0] not in ("-h", "--help"):
        print(f"isocrf: unknown command {positional[0]!r} (choose from {', '.join(COMMANDS)})", file=sys.stderr)
        return EXIT_UNKNOWN_COMMAND
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise CliError("isocrf: a command is required (see --help)", EXIT_USAGE)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return HANDLERS[args.command](args)
    except CliError as exc:
        msg = str(exc).splitlines()[0]
        print(msg if msg.startswith("isocrf") else f"isocrf: {msg}", file=sys.stderr)
        return exc.code
    except (CorpusError, StatisticsError) as exc:
        print(f"isocrf: {exc}", file=sys.stderr)
        return EXIT_DATA
    except ConfigError as exc:
        print(f"isocrf: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TrainingError as exc:
        print(f"isocrf: training failed: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except ValueError as exc:
        print(f"isocrf: {exc}".splitlines()[0], file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"isocrf: {exc}", file=sys.stderr)
        return EXIT_CANT_CREATE


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
