"""Levenshtein distances, anchor selection, and corpus-by-anchor matrices.

Pairwise comparison of a whole corpus is quadratic in both time and
memory, so every password is instead measured against a small set of
anchor passwords: an M-row corpus and N anchors give an M x N matrix of
edit distances whose rows act as N-dimensional feature vectors. Rows are
Lipschitz in the metric (triangle inequality), so passwords a few edits
apart get rows that differ by at most that many edits per coordinate.

Distances operate on Unicode code points, case-sensitively, matching
corpus ingestion; combining characters are not normalised.
"""

from __future__ import annotations

import hashlib
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numba
import numpy as np

from ._validation import as_counts, as_texts
from .corpus import Corpus
from .errors import DomainError, SchemaVersionError

MAX_TEXT_LEN = 65535  # distances are stored as u16
DEFAULT_BATCH_ROWS = 4096

PVDM_MAGIC = b"PVDM"
PVDM_VERSION = 1


def levenshtein(a: str, b: str) -> int:
    """Minimum number of single-character insertions, deletions, and
    substitutions turning ``a`` into ``b``.

    Classic dynamic program over the (|a|+1) x (|b|+1) grid, kept as a
    rolling row over the shorter string so memory is O(min(|a|, |b|)).
    """
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        diag = prev[0]
        prev[0] = i
        for j, cb in enumerate(b, 1):
            up = prev[j]
            cand = diag + (ca != cb)
            if up + 1 < cand:
                cand = up + 1
            if prev[j - 1] + 1 < cand:
                cand = prev[j - 1] + 1
            prev[j] = cand
            diag = up
    return prev[-1]


@numba.njit(cache=True, nogil=True)
def _lev_block(codes_a, len_a, codes_b, len_b, out):  # pragma: no cover - jitted
    """Distance of every row string in `codes_a` to every string in
    `codes_b`; integer DP, so results are exact and independent of how the
    work is split across calls."""
    n_a = codes_a.shape[0]
    n_b = codes_b.shape[0]
    width = codes_b.shape[1]
    buf = np.empty(width + 1, dtype=np.int32)
    for ia in range(n_a):
        la = len_a[ia]
        for ib in range(n_b):
            lb = len_b[ib]
            for j in range(lb + 1):
                buf[j] = j
            for i in range(1, la + 1):
                diag = buf[0]
                buf[0] = i
                ca = codes_a[ia, i - 1]
                for j in range(1, lb + 1):
                    up = buf[j]
                    cand = diag
                    if ca != codes_b[ib, j - 1]:
                        cand += 1
                    if up + 1 < cand:
                        cand = up + 1
                    if buf[j - 1] + 1 < cand:
                        cand = buf[j - 1] + 1
                    buf[j] = cand
                    diag = up
            out[ia, ib] = buf[lb]


def encode_texts(texts) -> tuple[np.ndarray, np.ndarray]:
    """Pad code-point arrays for the batch kernel: (codes, lengths)."""
    lengths = np.array([len(t) for t in texts], dtype=np.int64)
    width = max(1, int(lengths.max()) if len(lengths) else 1)
    codes = np.zeros((len(texts), width), dtype=np.int32)
    for i, t in enumerate(texts):
        if t:
            codes[i, : len(t)] = np.frombuffer(t.encode("utf-32-le"), dtype=np.uint32).astype(np.int32)
    return codes, lengths


def levenshtein_block(texts_a, texts_b, workers: int | None = None,
                      batch_rows: int = DEFAULT_BATCH_ROWS) -> np.ndarray:
    """Distances between every text in `texts_a` and every text in
    `texts_b`, as a uint16 array of shape (len(a), len(b)).

    Rows are computed in batches (disjoint output slices, one writer per
    row), so the result is bit-identical to a sequential computation
    regardless of the worker count.
    """
    for t in list(texts_a) + list(texts_b):
        if len(t) > MAX_TEXT_LEN:
            raise DomainError(
                f"password of length {len(t)} exceeds the {MAX_TEXT_LEN}-code-point cap "
                "of the 16-bit distance representation"
            )
    codes_a, len_a = encode_texts(texts_a)
    codes_b, len_b = encode_texts(texts_b)
    out = np.empty((len(texts_a), len(texts_b)), dtype=np.uint16)
    if out.size == 0:
        return out
    starts = list(range(0, len(texts_a), batch_rows))

    def run(start: int) -> None:
        stop = min(start + batch_rows, len(texts_a))
        block = np.empty((stop - start, len(texts_b)), dtype=np.uint16)
        _lev_block(codes_a[start:stop], len_a[start:stop], codes_b, len_b, block)
        out[start:stop] = block

    if workers is not None and workers > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(run, starts))
    else:
        for s in starts:
            run(s)
    return out


def _hash_anchor_list(anchors) -> bytes:
    h = hashlib.sha256()
    for a in anchors:
        raw = a.encode("utf-8")
        h.update(struct.pack("<I", len(raw)))
        h.update(raw)
    return h.digest()


@dataclass(frozen=True)
class AnchorSet:
    """The N anchor passwords defining distance-matrix columns.

    ``content_hash`` is a SHA-256 over the ordered anchor list (each text
    length-prefixed), so it changes iff the ordered list changes.
    """

    anchors: tuple[str, ...]
    seed: int
    source_name: str
    content_hash: bytes

    def __post_init__(self):
        if len(self.anchors) < 1:
            raise DomainError("anchor set must contain at least one password")
        if len(set(self.anchors)) != len(self.anchors):
            raise DomainError("anchor passwords must be pairwise distinct")

    def __len__(self) -> int:
        return len(self.anchors)

    @property
    def hash_hex(self) -> str:
        return self.content_hash.hex()

    @classmethod
    def from_anchors(cls, anchors, seed: int, source_name: str) -> "AnchorSet":
        anchors = tuple(anchors)
        return cls(anchors=anchors, seed=seed, source_name=source_name,
                   content_hash=_hash_anchor_list(anchors))


def select_anchors(c: Corpus, n: int, seed: int, weight_by_count: bool = False) -> AnchorSet:
    """Sample ``min(n, |c|)`` anchor passwords without replacement.

    Uniform over unique passwords by default; ``weight_by_count`` switches
    to occurrence-weighted sampling. Deterministic for a fixed
    (corpus, n, seed); anchor order is recorded and hashed.
    """
    texts = as_texts(c)
    if len(texts) == 0:
        raise DomainError("cannot select anchors from an empty corpus")
    if n < 1:
        raise DomainError(f"anchor count must be >= 1, got {n}")
    size = min(n, len(texts))
    rs = np.random.RandomState(seed)
    if size == len(texts):
        chosen = np.arange(len(texts))
    elif weight_by_count:
        counts = np.asarray(as_counts(c), dtype=np.float64)
        chosen = rs.choice(len(texts), size=size, replace=False, p=counts / counts.sum())
    else:
        chosen = rs.choice(len(texts), size=size, replace=False)
    name = getattr(c, "name", "memory")
    return AnchorSet.from_anchors([texts[i] for i in chosen], seed=seed, source_name=name)


@dataclass(frozen=True, eq=False)
class DistanceMatrix:
    """M x N grid of edit distances: row i is corpus record i, column j is
    anchor j. Values are u16 edit counts; anchor_hash binds the columns to
    an AnchorSet."""

    values: np.ndarray
    anchors: tuple[str, ...]
    anchor_hash: bytes

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __eq__(self, other):
        return (
            isinstance(other, DistanceMatrix)
            and self.anchors == other.anchors
            and self.anchor_hash == other.anchor_hash
            and np.array_equal(self.values, other.values)
        )


def build_distance_matrix(c: Corpus, s: AnchorSet, workers: int | None = None,
                          batch_rows: int = DEFAULT_BATCH_ROWS) -> DistanceMatrix:
    """values[i][j] = levenshtein(record i, anchor j) for all i, j."""
    values = levenshtein_block(as_texts(c), s.anchors, workers=workers, batch_rows=batch_rows)
    return DistanceMatrix(values=values, anchors=s.anchors, anchor_hash=s.content_hash)


def anchor_row(p: str, s: AnchorSet) -> np.ndarray:
    """The distance-matrix row a password would get: one distance per anchor."""
    return levenshtein_block([p], s.anchors)[0]


def save_distance_matrix(m: DistanceMatrix, path) -> None:
    """Persist to the PVDM binary layout: magic "PVDM", version u16, M u64,
    N u32 (all little-endian), M*N u16 values row-major, the anchor list as
    length-prefixed UTF-8 strings, then the 32-byte anchor content hash."""
    from ._util import atomic_write_bytes

    rows, cols = m.values.shape
    parts = [PVDM_MAGIC, struct.pack("<HQI", PVDM_VERSION, rows, cols)]
    parts.append(np.ascontiguousarray(m.values, dtype="<u2").tobytes())
    for a in m.anchors:
        raw = a.encode("utf-8")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
    parts.append(m.anchor_hash)
    atomic_write_bytes(path, b"".join(parts))


def load_distance_matrix(path) -> DistanceMatrix:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != PVDM_MAGIC:
        raise SchemaVersionError(f"{path}: not a PVDM distance-matrix file")
    version, rows, cols = struct.unpack_from("<HQI", data, 4)
    if version != PVDM_VERSION:
        raise SchemaVersionError(f"{path}: unsupported PVDM version {version}")
    offset = 4 + struct.calcsize("<HQI")
    n_bytes = rows * cols * 2
    values = np.frombuffer(data, dtype="<u2", count=rows * cols, offset=offset)
    values = values.reshape(rows, cols).astype(np.uint16)
    offset += n_bytes
    anchors = []
    for _ in range(cols):
        (ln,) = struct.unpack_from("<I", data, offset)
        offset += 4
        anchors.append(data[offset : offset + ln].decode("utf-8"))
        offset += ln
    anchor_hash = data[offset : offset + 32]
    if anchor_hash != _hash_anchor_list(anchors):
        raise SchemaVersionError(f"{path}: anchor hash does not match the stored anchor list")
    return DistanceMatrix(values=values, anchors=tuple(anchors), anchor_hash=anchor_hash)
