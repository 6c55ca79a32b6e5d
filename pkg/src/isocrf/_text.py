"""Normalization helpers shared by feature extraction, lexicon building and matching."""

from __future__ import annotations

import re
from pathlib import Path
from typing import Iterable, Sequence

SENTI_POS = "SentiWord_pos"
SENTI_NEG = "SentiWord_neg"
GENERAL_REL = "Rel"

_WORD_RE = re.compile(r"\w+", re.UNICODE)
_REL_SQUEEZE = re.compile(r"\s*([(),])\s*")


class ConfigError(ValueError):
    """A resource file or option is missing or unusable."""


def norm(form: str) -> str:
    return form.lower()


def words(text: str) -> list[str]:
    return [w.lower() for w in _WORD_RE.findall(text)]


def is_word(form: str) -> bool:
    return any(ch.isalnum() for ch in form)


def rel_surface(relation: str, head: str, dependent: str) -> str:
    return f"{relation}({head},{dependent})"


def placeholder(polarity: int) -> str:
    return SENTI_POS if polarity > 0 else SENTI_NEG


def normalize_surface(surface: str, unit_type: str = "uni") -> str:
    """Canonical form used for lexicon entries; matches what the extractors emit."""
    s = " ".join(surface.split())
    if unit_type in ("dep", "sentdep"):
        s = _REL_SQUEEZE.sub(r"\1", s)
        head, paren, rest = s.partition("(")
        rest = rest.lower().replace(SENTI_POS.lower(), SENTI_POS).replace(SENTI_NEG.lower(), SENTI_NEG)
        return (GENERAL_REL if head.lower() == GENERAL_REL.lower() else head.lower()) + paren + rest
    return s.lower()


def read_lines(path) -> list[str]:
    """Non-blank, non-comment lines of a UTF-8 resource file."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read resource file {path}: {exc.strerror}") from exc
    out = []
    for line in text.splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            out.append(line)
    return out


def read_wordlist(path) -> tuple[tuple[str, ...], ...]:
    """One (possibly multi-word) entry per line, tokenized on whitespace and lowercased."""
    return tuple(tuple(line.lower().split()) for line in read_lines(path))


def find_phrases(tokens: Sequence[str], phrases: Iterable[tuple[str, ...]]) -> list[tuple[int, int, tuple[str, ...]]]:
    """All (start, end, phrase) occurrences of the phrases in a lowercased token list."""
    hits = []
    by_first: dict[str, list[tuple[str, ...]]] = {}
    for p in phrases:
        if p:
            by_first.setdefault(p[0], []).append(p)
    for i, tok in enumerate(tokens):
        for p in by_first.get(tok, ()):
            if tuple(tokens[i:i + len(p)]) == p:
                hits.append((i, i + len(p), p))
    return hits
