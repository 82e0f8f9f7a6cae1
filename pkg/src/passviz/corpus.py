"""Ingest leaked-password dumps into deduplicated, counted corpora.

A dump is UTF-8 text, one entry per line, ``\\n`` or ``\\r\\n`` terminated.
Two layouts are understood: ``plain`` (the whole line is the password) and
``user-colon-password`` (the password is everything after the first ``:``).
Passwords are compared case-sensitively as sequences of Unicode code
points; lines that do not decode, or that are empty after extraction, are
skipped and counted rather than repaired.
"""

from __future__ import annotations

import itertools
import os
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, UsageError

FORMATS = ("plain", "user-colon-password")


@dataclass(frozen=True)
class PasswordRecord:
    """One distinct password: its text, occurrence count, and stable index."""

    text: str
    count: int
    index: int


@dataclass(frozen=True)
class Corpus:
    """Deduplicated view of a dump, in first-appearance order.

    Invariant: ``sum(r.count for r in records) + skipped == raw_total``.
    Instances are immutable and safe to share across threads.
    """

    name: str
    records: tuple[PasswordRecord, ...]
    raw_total: int
    skipped: int
    _text_to_index: dict = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(
            self, "_text_to_index", {r.text: r.index for r in self.records}
        )

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, text: str) -> bool:
        return text in self._text_to_index

    def index_of(self, text: str) -> int:
        return self._text_to_index[text]

    def texts(self) -> list[str]:
        return [r.text for r in self.records]

    def counts(self) -> np.ndarray:
        return np.array([r.count for r in self.records], dtype=np.int64)


@dataclass(frozen=True)
class StatsReport:
    """Summary of a corpus: unique/raw sizes and the length distribution."""

    name: str
    unique: int
    raw_total: int
    skipped: int
    length_histogram: dict[int, int]
    min_length: int | None
    max_length: int | None

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "unique": self.unique,
            "raw_total": self.raw_total,
            "skipped": self.skipped,
            "min_length": self.min_length,
            "max_length": self.max_length,
            "length_histogram": {str(k): v for k, v in sorted(self.length_histogram.items())},
        }


def corpus_from_texts(texts, name: str = "memory", counts=None) -> Corpus:
    """Build a corpus directly from an iterable of password texts.

    Duplicate texts accumulate counts, matching file ingestion. Mostly a
    convenience for tests and for re-packaging subsets (intersections,
    samples) as corpora.
    """
    merged: dict[str, int] = {}
    total = 0
    counts = counts if counts is not None else itertools.repeat(1)
    for text, c in zip(texts, counts):
        if not text:
            raise DomainError("password texts must be non-empty")
        merged[text] = merged.get(text, 0) + c
        total += c
    records = tuple(
        PasswordRecord(text=t, count=c, index=i) for i, (t, c) in enumerate(merged.items())
    )
    return Corpus(name=name, records=records, raw_total=total, skipped=0)


def load_corpus(path: str | os.PathLike, format: str = "plain", name: str | None = None) -> Corpus:
    """Read a dump file into a Corpus.

    One PasswordRecord per distinct password, counts accumulating
    duplicates, records in first-appearance order. Lines that are empty
    after extraction or not decodable as UTF-8 increment ``skipped``.
    In ``user-colon-password`` format a line without a ``:`` has no
    extractable password and is skipped.

    Raises UsageError for an unknown format tag; OSError propagates for
    unreadable paths.
    """
    if format not in FORMATS:
        raise UsageError(f"unknown corpus format {format!r}; expected one of {FORMATS}")
    path = os.fspath(path)
    with open(path, "rb") as fh:
        data = fh.read()

    lines = data.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()  # file ended with a newline; not a line of its own

    merged: dict[str, int] = {}
    skipped = 0
    for raw in lines:
        if raw.endswith(b"\r"):
            raw = raw[:-1]
        try:
            line = raw.decode("utf-8")
        except UnicodeDecodeError:
            skipped += 1
            continue
        if format == "user-colon-password":
            _, sep, line = line.partition(":")
            if not sep:
                skipped += 1
                continue
        if not line:
            skipped += 1
            continue
        merged[line] = merged.get(line, 0) + 1

    records = tuple(
        PasswordRecord(text=t, count=c, index=i) for i, (t, c) in enumerate(merged.items())
    )
    return Corpus(
        name=name if name is not None else os.path.splitext(os.path.basename(path))[0],
        records=records,
        raw_total=len(lines),
        skipped=skipped,
    )


def corpus_stats(c: Corpus) -> StatsReport:
    """Unique/raw counts plus the password-length histogram."""
    hist = Counter(len(r.text) for r in c.records)
    return StatsReport(
        name=c.name,
        unique=len(c.records),
        raw_total=c.raw_total,
        skipped=c.skipped,
        length_histogram=dict(hist),
        min_length=min(hist) if hist else None,
        max_length=max(hist) if hist else None,
    )


def sample_corpus(c: Corpus, k: int, seed: int) -> Corpus:
    """Uniform sample of ``min(k, |c|)`` records without replacement.

    Deterministic for a fixed seed. Selected records keep their relative
    (first-appearance) order and are re-indexed contiguously from 0.
    """
    if k < 1:
        raise DomainError(f"sample size must be >= 1, got {k}")
    size = min(k, len(c.records))
    rs = np.random.RandomState(seed)
    chosen = np.sort(rs.choice(len(c.records), size=size, replace=False))
    records = tuple(
        PasswordRecord(text=c.records[orig].text, count=c.records[orig].count, index=i)
        for i, orig in enumerate(chosen)
    )
    raw = sum(r.count for r in records)
    return Corpus(name=c.name, records=records, raw_total=raw, skipped=0)
