"""Inline-tag transcript grammar: parse, serialize, strip, locate events.

A transcript is a flat token sequence mixing lexical units (extended grapheme
clusters) with bracketed paralinguistic tags, e.g. 不知道[Breathing]，我没想过.
Brackets are reserved: every "[" must open a tag known to the governing
taxonomy. Whitespace is dropped; everything else (punctuation included) is
kept as lexical tokens. Input is NFC-normalized before parsing so visually
identical strings compare equal in downstream metrics.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import Iterator

import regex

from .errors import ParaspeechError
from .taxonomy import ParaCategory, Taxonomy, resolve_surface

_GRAPHEME = regex.compile(r"\X")


class TranscriptError(ParaspeechError):
    pass


class UnknownTag(TranscriptError):
    def __init__(self, surface: str, byte_offset: int):
        self.surface = surface
        self.byte_offset = byte_offset
        super().__init__(f"unknown tag {surface} at byte {byte_offset}")


class UnbalancedBracket(TranscriptError):
    def __init__(self, byte_offset: int):
        self.byte_offset = byte_offset
        super().__init__(f"unbalanced bracket at byte {byte_offset}")


@dataclass(frozen=True)
class Lexical:
    unit: str

    def __str__(self) -> str:
        return self.unit


@dataclass(frozen=True)
class Tag:
    category: ParaCategory

    def __str__(self) -> str:
        return self.category.surface


TranscriptToken = Lexical | Tag


@dataclass(frozen=True)
class TaggedTranscript:
    tokens: tuple[TranscriptToken, ...]
    raw: str

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[TranscriptToken]:
        return iter(self.tokens)


@dataclass(frozen=True)
class TagEvent:
    """Where one tag sits: token position, and grapheme offset in the
    tag-stripped lexical string."""

    category: ParaCategory
    token_index: int
    char_offset: int


def _byte_offset(text: str, index: int) -> int:
    return len(text[:index].encode("utf-8"))


def parse_transcript(raw: str, t: Taxonomy) -> TaggedTranscript:
    """Parse a raw transcript string under taxonomy ``t``.

    Every maximal bracketed span must resolve to a taxonomy surface or alias
    (UnknownTag otherwise, reporting the UTF-8 byte offset of the "["); a "["
    with no matching "]" before the next "[" or end of input, or a stray "]",
    is UnbalancedBracket. Never raises anything else, for any input.
    """
    text = unicodedata.normalize("NFC", raw)
    tokens: list[TranscriptToken] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "[":
            close = text.find("]", i + 1)
            reopen = text.find("[", i + 1)
            if close == -1 or (reopen != -1 and reopen < close):
                raise UnbalancedBracket(_byte_offset(text, i))
            span = text[i : close + 1]
            cat = resolve_surface(t, span)
            if cat is None:
                raise UnknownTag(span, _byte_offset(text, i))
            tokens.append(Tag(cat))
            i = close + 1
        elif ch == "]":
            raise UnbalancedBracket(_byte_offset(text, i))
        else:
            j = i
            while j < n and text[j] not in "[]":
                j += 1
            for unit in _GRAPHEME.findall(text[i:j]):
                if not unit.isspace():
                    tokens.append(Lexical(unit))
            i = j
    return TaggedTranscript(tuple(tokens), raw=raw)


def serialize(tt: TaggedTranscript) -> str:
    """Canonical string form: lexical units and canonical tag surfaces,
    concatenated in token order. Aliases come out canonicalized."""
    return "".join(str(tok) for tok in tt.tokens)


def strip_tags(tt: TaggedTranscript) -> TaggedTranscript:
    """The lexical-only subsequence; idempotent."""
    lex = tuple(tok for tok in tt.tokens if isinstance(tok, Lexical))
    return TaggedTranscript(lex, raw="".join(t.unit for t in lex))


def tag_events(tt: TaggedTranscript) -> list[TagEvent]:
    """One event per tag token, located by token index and by grapheme
    offset into the stripped lexical string."""
    events: list[TagEvent] = []
    lexical_seen = 0
    for idx, tok in enumerate(tt.tokens):
        if isinstance(tok, Tag):
            events.append(TagEvent(tok.category, token_index=idx, char_offset=lexical_seen))
        else:
            lexical_seen += 1
    return events


def event_categories(tt: TaggedTranscript) -> list[str]:
    """Category ids of the tag tokens, in order (multiset of events)."""
    return [tok.category.id for tok in tt.tokens if isinstance(tok, Tag)]


def is_punctuation(tok: TranscriptToken) -> bool:
    """True for lexical tokens whose leading codepoint is Unicode punctuation."""
    return isinstance(tok, Lexical) and unicodedata.category(tok.unit[0]).startswith("P")
