"""Input-validation helpers so estimators and operations accept either the
domain types or plain sequences/arrays, sklearn-style."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import DomainError


def as_texts(X) -> list[str]:
    """Accept a Corpus or a sequence of strings; return a list of texts."""
    records = getattr(X, "records", None)
    if records is not None:
        return [r.text for r in records]
    if isinstance(X, str):
        raise DomainError("expected a corpus or a sequence of strings, got a single string")
    texts = list(X)
    for t in texts:
        if not isinstance(t, str):
            raise DomainError(f"expected strings, got {type(t).__name__}")
    return texts


def as_counts(X) -> list[int]:
    """Occurrence counts aligned with as_texts(X); 1 when unavailable."""
    records = getattr(X, "records", None)
    if records is not None:
        return [r.count for r in records]
    return [1] * len(list(X))


def as_coords(X) -> np.ndarray:
    """Accept an Embedding or an (M, 2) array; return float64 coordinates."""
    coords = getattr(X, "coords", X)
    arr = np.asarray(coords, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise DomainError(f"expected an (M, 2) coordinate array, got shape {arr.shape}")
    return arr


def as_matrix(X) -> np.ndarray:
    """Accept a DistanceMatrix or a 2-D array; return a float64 matrix."""
    values = getattr(X, "values", X)
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError(f"expected a 2-D matrix, got shape {arr.shape}")
    return arr


def check_positive_int(value, name: str) -> int:
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool) or value < 1:
        raise DomainError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def check_alignment(n_points: int, other: Sequence, name: str) -> None:
    if len(other) != n_points:
        raise DomainError(f"{name} has {len(other)} entries but the embedding has {n_points} points")
