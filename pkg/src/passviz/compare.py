"""Cross-corpus analytics: exact set intersection and side-by-side
digit-composition profiles.

Matching is exact, case-sensitive text equality; fuzzy reuse detection is
out of scope. Shared password lists are sensitive, so serialisation omits
them unless explicitly requested.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .corpus import Corpus
from .features import decile_histogram, feature_table


@dataclass(frozen=True)
class IntersectionReport:
    name_a: str
    name_b: str
    shared: tuple[str, ...]
    count: int
    pct_of_a: float
    pct_of_b: float

    def to_dict(self, include_shared: bool = False) -> dict:
        doc = {
            "corpus_a": self.name_a,
            "corpus_b": self.name_b,
            "count": self.count,
            "pct_of_a": self.pct_of_a,
            "pct_of_b": self.pct_of_b,
        }
        if include_shared:
            doc["shared"] = list(self.shared)
        return doc


@dataclass(frozen=True)
class DigitProfileComparison:
    """Percentage of passwords per digit-ratio decile, for two corpora."""

    deciles: tuple[int, ...]
    share_a: tuple[float, ...]
    share_b: tuple[float, ...]
    difference: tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "deciles": list(self.deciles),
            "share_a_pct": list(self.share_a),
            "share_b_pct": list(self.share_b),
            "difference_pct": list(self.difference),
        }


def intersect(a: Corpus, b: Corpus) -> IntersectionReport:
    """Exact intersection of the unique password sets, listed in a's
    record order. Percentages are relative to each corpus's unique size
    (0 when a corpus is empty)."""
    in_b = frozenset(r.text for r in b.records)
    shared = tuple(r.text for r in a.records if r.text in in_b)
    count = len(shared)
    return IntersectionReport(
        name_a=a.name,
        name_b=b.name,
        shared=shared,
        count=count,
        pct_of_a=100.0 * count / len(a.records) if a.records else 0.0,
        pct_of_b=100.0 * count / len(b.records) if b.records else 0.0,
    )


def mark_membership(target: Corpus, reference: Corpus) -> np.ndarray:
    """Boolean vector aligned with target: element i is True iff target
    record i's text appears in the reference corpus."""
    in_ref = frozenset(r.text for r in reference.records)
    return np.array([r.text in in_ref for r in target.records], dtype=bool)


def compare_digit_profiles(a: Corpus, b: Corpus) -> DigitProfileComparison:
    """Decile histograms of digit percentage for both corpora, as shares of
    each corpus (percent), plus their difference (a minus b)."""
    deciles = tuple(range(0, 101, 10))
    out = []
    for corpus in (a, b):
        hist = decile_histogram(feature_table(corpus))
        n = max(1, len(corpus.records))
        out.append(tuple(100.0 * hist[d] / n for d in deciles))
    share_a, share_b = out
    diff = tuple(x - y for x, y in zip(share_a, share_b))
    return DigitProfileComparison(deciles=deciles, share_a=share_a, share_b=share_b, difference=diff)
