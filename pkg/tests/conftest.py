import pytest
from hypothesis import settings

from isocrf.corpus import Annotation, AnnotatedSpan, DependencyArc, Discussion, TextUnit, Token, Turn, TurnAnnotation

# deterministic, no per-example deadline (some examples train small models)
settings.register_profile("repo", deadline=None, derandomize=True)
settings.load_profile("repo")


def make_unit(words, pos=None, arcs=(), quotes=(), label=None, text=None, annotation=None):
    pos = pos or ["NN"] * len(words)
    text = text if text is not None else " ".join(words)
    return TextUnit(text, tuple(Token(w, p) for w, p in zip(words, pos)),
                    tuple(DependencyArc(*a) for a in arcs), tuple(quotes), label, annotation)


def aawd_unit(spans=(), turn_labels=(), text="some text here"):
    ann = Annotation(tuple(AnnotatedSpan(a, p, s, e) for a, p, s, e in spans),
                     tuple(TurnAnnotation(a, p) for a, p in turn_labels), ())
    return TextUnit(text, (Token("some", "DT"),), annotation=ann)


def discussion(did, speakers, units_per_turn=1):
    turns = []
    for i, sp in enumerate(speakers):
        turns.append(Turn(f"t{i}", sp, tuple(make_unit(["hello", str(i)]) for _ in range(units_per_turn)),
                          None if i == 0 else f"t{i - 1}"))
    return Discussion(did, tuple(turns))


@pytest.fixture
def toy():
    from isocrf.synthetic import toy_corpus
    return toy_corpus(0, n_discussions=12)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
