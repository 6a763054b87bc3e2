"""Question-type lexicon: prefix table, coarse groups, and type inference."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class CoarseGroup(str, Enum):
    WH = "wh"
    YESNO = "yesno"
    NUMBER = "number"
    OTHER = "other"


# Presentation order for coarse groups: wh -> yesno -> other -> number.
GROUP_ORDER = (CoarseGroup.WH, CoarseGroup.YESNO, CoarseGroup.OTHER, CoarseGroup.NUMBER)

_WH = [
    "what color is the", "what is the woman", "where is the", "what are",
    "what color is", "what number is", "what color", "what color are the",
    "what brand", "what is in the", "why is the", "what time", "why",
    "what sport is", "what room is", "what", "what is the name",
    "what is this", "which", "what is on the", "what are the",
    "what type of", "what is the man", "what is the person",
    "what is the color of the", "who is", "where are the", "what does the",
    "what is", "what animal is", "what is the", "what kind of",
]

_YESNO = [
    "do you", "does the", "is the", "is this", "is there", "are the", "has",
    "was", "could", "are they", "is he", "how", "is this a", "do", "is it",
    "are", "is this an", "can you", "does this", "is", "are there any",
    "are there", "is that a", "is the woman", "is the man", "are these",
    "is the person", "is this person", "is there a",
]

_OTHER = ["none of the above"]

_NUMBER = ["how many", "how many people are", "how many people are in"]

FALLBACK_PREFIX = "none of the above"


@dataclass(frozen=True)
class LexiconEntry:
    type_id: int
    prefix: str
    group: CoarseGroup


class TypeLexicon:
    """Ordered prefix table mapping question text to a task type id.

    Entries are kept in priority order; type ids are their positions. Lookup
    picks the longest matching prefix at a word boundary, falling back to the
    "none of the above" entry when nothing matches.
    """

    def __init__(self, entries: list[LexiconEntry]):
        if not entries:
            raise ValueError("lexicon must have at least one entry")
        prefixes = [e.prefix for e in entries]
        if len(set(prefixes)) != len(prefixes):
            raise ValueError("lexicon prefixes must be unique")
        for i, e in enumerate(entries):
            if e.type_id != i:
                raise ValueError(f"entry {e.prefix!r} has type_id {e.type_id}, expected {i}")
        self.entries = list(entries)
        self._by_prefix = {e.prefix: e for e in entries}
        self._fallback = self._by_prefix.get(FALLBACK_PREFIX)

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, type_id: int) -> LexiconEntry:
        return self.entries[type_id]

    def group_of(self, type_id: int) -> CoarseGroup:
        return self.entries[type_id].group

    def infer_type(self, question_text: str) -> int:
        """Return the type id of the longest prefix matching the question.

        The question is normalized (lowercased, whitespace collapsed, leading
        punctuation stripped) before matching. A prefix matches only at a word
        boundary, so "what color is the" does not fire on "what color is
        theatre...". Equal-length ties cannot occur with unique prefixes; among
        the matches the longest wins. No match returns the fallback entry.
        """
        text = normalize_question(question_text)
        best: LexiconEntry | None = None
        for e in self.entries:
            p = e.prefix
            if text == p or (text.startswith(p) and not text[len(p)].isalnum()):
                if best is None or len(p) > len(best.prefix):
                    best = e
        if best is None:
            if self._fallback is None:
                raise LookupError(f"no prefix matches {question_text!r} and lexicon has no fallback entry")
            return self._fallback.type_id
        return best.type_id

    def group_type_ids(self) -> dict[CoarseGroup, list[int]]:
        """Type ids per coarse group, each list in lexicon order."""
        out: dict[CoarseGroup, list[int]] = {g: [] for g in GROUP_ORDER}
        for e in self.entries:
            out[e.group].append(e.type_id)
        return out

    def to_json(self) -> list[dict]:
        return [{"prefix": e.prefix, "group": e.group.value} for e in self.entries]

    @classmethod
    def from_json(cls, data: list[dict]) -> "TypeLexicon":
        entries = [
            LexiconEntry(i, item["prefix"], CoarseGroup(item["group"]))
            for i, item in enumerate(data)
        ]
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path) -> "TypeLexicon":
        with open(path) as f:
            return cls.from_json(json.load(f))

    def save(self, path: str | Path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_json(), f, indent=1)


def normalize_question(text: str) -> str:
    """Lowercase, collapse whitespace, strip leading punctuation."""
    text = re.sub(r"\s+", " ", text.lower()).strip()
    return text.lstrip("\"'?!.,;:-() ")


def default_lexicon() -> TypeLexicon:
    """The 65-prefix lexicon: 32 wh, 29 yes/no, 1 other, 3 number."""
    entries = []
    for group, prefixes in (
        (CoarseGroup.WH, _WH),
        (CoarseGroup.YESNO, _YESNO),
        (CoarseGroup.OTHER, _OTHER),
        (CoarseGroup.NUMBER, _NUMBER),
    ):
        for p in prefixes:
            entries.append(LexiconEntry(len(entries), p, group))
    return TypeLexicon(entries)
