"""Hierarchical Read codes.

A Read code is rendered as seven characters: a five character code followed
by a two character term suffix, e.g. ``N245.13``.  The code is hierarchical
from left to right: a level-k code specifies its first k characters and pads
the rest with dots (``N24..`` is level 3, ``N245.`` level 4,
``N2457`` level 5).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Mapping

from adrsig.errors import IoError, MalformedCode

CODE_LEN = 5
TERM_LEN = 2
RAW_LEN = CODE_LEN + TERM_LEN
MAX_LEVEL = 5


def _level_of(code: str) -> int:
    level = 0
    for ch in code:
        if ch == ".":
            break
        level += 1
    return level


@dataclass(frozen=True, order=True)
class ReadCode:
    code: str
    term: str = "00"
    level: int = 0

    def __post_init__(self):
        if len(self.code) != CODE_LEN or len(self.term) != TERM_LEN:
            raise MalformedCode(
                f"code must be {CODE_LEN} chars and term {TERM_LEN}: {self.code!r}{self.term!r}"
            )
        level = _level_of(self.code)
        if level == 0:
            raise MalformedCode(f"all-dot code: {self.code!r}")
        if any(ch != "." for ch in self.code[level:]):
            raise MalformedCode(f"character after '.' breaks the hierarchy: {self.code!r}")
        if not all(ch.isascii() and ch.isalnum() for ch in self.code[:level]):
            raise MalformedCode(f"code characters must be alphanumeric: {self.code!r}")
        if not all(ch.isascii() and ch.isalnum() for ch in self.term):
            raise MalformedCode(f"term characters must be alphanumeric: {self.term!r}")
        if self.level == 0:
            object.__setattr__(self, "level", level)
        elif self.level != level:
            raise MalformedCode(f"level {self.level} does not match code {self.code!r}")

    def __str__(self):
        return self.code + self.term

    def render(self) -> str:
        """Canonical seven character form."""
        return self.code + self.term


def render(c: ReadCode) -> str:
    return c.code + c.term


@lru_cache(maxsize=1 << 16)
def parse_readcode(raw: str) -> ReadCode:
    """Parse a seven character Read code such as ``"N245.13"``.

    Raises MalformedCode for a wrong length, a non-printable character, an
    all-dot code, or a character following a dot within the code part.
    """
    if not isinstance(raw, str) or len(raw) != RAW_LEN:
        raise MalformedCode(f"expected {RAW_LEN} characters, got {raw!r}")
    if not raw.isprintable():
        raise MalformedCode(f"non-printable character in {raw!r}")
    return ReadCode(raw[:CODE_LEN], raw[CODE_LEN:])


def truncate_to_level(c: ReadCode, target_level: int) -> ReadCode:
    """Truncate ``c`` to at most ``target_level`` and normalise the term to "00".

    Codes already at or above the target in the hierarchy keep their code
    part; only the term is reset.
    """
    if not 1 <= target_level <= MAX_LEVEL:
        raise ValueError(f"target_level must be in 1..{MAX_LEVEL}, got {target_level}")
    if c.level <= target_level:
        if c.term == "00":
            return c
        return ReadCode(c.code, "00", c.level)
    return ReadCode(c.code[:target_level] + "." * (CODE_LEN - target_level), "00", target_level)


class CodeDictionary:
    """Mapping from canonical seven character codes to descriptions.

    Lookups never fail: unknown codes get an ``<unknown:CODE>`` placeholder.
    """

    def __init__(self, entries: Mapping[str, str] | None = None):
        self.entries: dict[str, str] = {}
        for raw, text in (entries or {}).items():
            self.entries[render(parse_readcode(raw))] = text

    def __len__(self):
        return len(self.entries)

    def __contains__(self, raw):
        return raw in self.entries

    def describe(self, c: ReadCode | str) -> str:
        key = c if isinstance(c, str) else render(c)
        try:
            return self.entries[key]
        except KeyError:
            return f"<unknown:{key}>"

    def codes(self) -> list[ReadCode]:
        return [parse_readcode(raw) for raw in sorted(self.entries)]

    @classmethod
    def load(cls, path, delimiter: str = "\t", header: bool = False) -> "CodeDictionary":
        """Read a two-column (code, description) UTF-8 file."""
        try:
            with open(path, newline="", encoding="utf-8") as fh:
                rows = list(csv.reader(fh, delimiter=delimiter))
        except OSError as exc:
            raise IoError(f"cannot read dictionary {path}: {exc}") from exc
        if header and rows:
            rows = rows[1:]
        entries = {}
        for lineno, row in enumerate(rows, start=2 if header else 1):
            if not row:
                continue
            if len(row) < 2:
                raise MalformedCode(f"{Path(path).name}:{lineno}: expected code and description")
            entries[row[0].strip()] = row[1].strip()
        return cls(entries)


def describe(dictionary: CodeDictionary, c: ReadCode | str) -> str:
    return dictionary.describe(c)


def aggregate(codes: Iterable[ReadCode], level: int) -> list[ReadCode]:
    """Distinct truncated codes in canonical order."""
    return sorted({truncate_to_level(c, level) for c in codes}, key=render)
