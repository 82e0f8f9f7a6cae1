"""Per-password structural features for colouring, filtering, and analysis.

All predicates are pure. Digits mean ASCII '0'-'9' only, so rules are
deterministic across locales; lengths count Unicode code points.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .errors import DomainError

DEFAULT_YEAR_RANGES = ((1900, 1999), (2000, 2099))

# US-QWERTY rows; a keyboard sequence is a contiguous run inside one row,
# forward or reversed.
KEYBOARD_ROWS = ("qwertyuiop", "asdfghjkl", "zxcvbnm", "1234567890")

_DIGITS = frozenset("0123456789")


@dataclass(frozen=True)
class PasswordFeatures:
    length: int
    digit_count: int
    digit_ratio: float
    digit_ratio_decile: int
    digit_position_ratio: float
    years_1900s: tuple[int, ...]
    years_2000s: tuple[int, ...]
    has_numeric_sequence: bool
    has_keyboard_sequence: bool

    def flags(self) -> dict:
        return {
            "year_1900s": bool(self.years_1900s),
            "year_2000s": bool(self.years_2000s),
            "numeric_sequence": self.has_numeric_sequence,
            "keyboard_sequence": self.has_keyboard_sequence,
        }


def digit_count(p: str) -> int:
    return sum(1 for ch in p if ch in _DIGITS)


def digit_ratio(p: str) -> float:
    """Fraction of code points that are ASCII digits."""
    if not p:
        raise DomainError("digit_ratio of an empty password is undefined")
    return digit_count(p) / len(p)


def digit_ratio_decile(p: str) -> int:
    """Digit ratio snapped to the nearest 10 percent, half rounding up.

    Integer arithmetic: floor(10*c/L + 1/2) == (20c + L) // (2L), immune
    to float representation of ratios like 0.35.
    """
    if not p:
        raise DomainError("digit_ratio_decile of an empty password is undefined")
    c, L = digit_count(p), len(p)
    return (20 * c + L) // (2 * L) * 10


def digit_position_ratio(p: str) -> float:
    """Mean normalised position of the digits in a password.

    Positions are 0-based and divided by length-1, so 0 means digits
    bunched at the start, 1 at the end. By convention the value is 0.5
    when there are no digits or the password has length 1.
    """
    if not p:
        raise DomainError("digit_position_ratio of an empty password is undefined")
    positions = [i for i, ch in enumerate(p) if ch in _DIGITS]
    if not positions or len(p) == 1:
        return 0.5
    return sum(positions) / (len(positions) * (len(p) - 1))


def char_at(p: str, position: int, ch: str) -> bool:
    """True iff the code point at `position` equals `ch`; negative positions
    count from the end (-1 = last); out of range is False."""
    idx = position if position >= 0 else len(p) + position
    return 0 <= idx < len(p) and p[idx] == ch


def matches_regex(p: str, pattern: str | re.Pattern) -> bool:
    """Unanchored regex search (anchors available inside the pattern).

    An invalid pattern raises re.error, which carries the offending
    position in its ``pos`` attribute.
    """
    if isinstance(pattern, str):
        pattern = re.compile(pattern)
    return pattern.search(p) is not None


def find_years(p: str, ranges=DEFAULT_YEAR_RANGES) -> list[tuple[int, int]]:
    """All (value, start offset) for 4-character all-digit windows whose
    value falls in one of the inclusive ranges, left to right; overlapping
    windows are all reported, so years inside longer digit runs (DDMMYYYY)
    still match."""
    if not ranges:
        raise DomainError("find_years needs at least one year range")
    hits = []
    for start in range(len(p) - 3):
        window = p[start : start + 4]
        if all(ch in _DIGITS for ch in window):
            value = int(window)
            if any(lo <= value <= hi for lo, hi in ranges):
                hits.append((value, start))
    return hits


def has_numeric_sequence(p: str, min_len: int = 3, descending: bool = False) -> bool:
    """True iff the password contains >= min_len consecutive digits each
    exactly one greater than the previous (ascending, no wraparound).
    `descending` additionally accepts runs stepping down by one."""
    if min_len < 2:
        raise DomainError(f"min_len must be >= 2, got {min_len}")
    for step in (1, -1) if descending else (1,):
        run = 1
        for prev, cur in zip(p, p[1:]):
            if prev in _DIGITS and cur in _DIGITS and ord(cur) - ord(prev) == step:
                run += 1
                if run >= min_len:
                    return True
            else:
                run = 1
    return False


def has_keyboard_sequence(p: str, min_len: int = 4) -> bool:
    """True iff the lowercased password contains a length >= min_len window
    that is a contiguous run (forward or reversed) of one QWERTY row."""
    if min_len < 2:
        raise DomainError(f"min_len must be >= 2, got {min_len}")
    lowered = p.lower()
    if len(lowered) < min_len:
        return False
    rows = [r for row in KEYBOARD_ROWS for r in (row, row[::-1])]
    for start in range(len(lowered) - min_len + 1):
        window = lowered[start : start + min_len]
        if any(window in row for row in rows):
            return True
    return False


def extract_features(p: str) -> PasswordFeatures:
    years = find_years(p)
    return PasswordFeatures(
        length=len(p),
        digit_count=digit_count(p),
        digit_ratio=digit_ratio(p),
        digit_ratio_decile=digit_ratio_decile(p),
        digit_position_ratio=digit_position_ratio(p),
        years_1900s=tuple(v for v, _ in years if 1900 <= v <= 1999),
        years_2000s=tuple(v for v, _ in years if 2000 <= v <= 2099),
        has_numeric_sequence=has_numeric_sequence(p),
        has_keyboard_sequence=has_keyboard_sequence(p),
    )


def feature_table(c) -> list[PasswordFeatures]:
    """Features for every record, aligned with corpus indices."""
    from ._validation import as_texts

    return [extract_features(t) for t in as_texts(c)]


def decile_histogram(table: list[PasswordFeatures]) -> dict[int, int]:
    """How many passwords fall in each digit-percentage decile (0..100)."""
    hist = {d: 0 for d in range(0, 101, 10)}
    for f in table:
        hist[f.digit_ratio_decile] += 1
    return hist
