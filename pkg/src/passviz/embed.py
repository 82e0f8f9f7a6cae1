"""t-SNE reduction of anchor-distance rows to 2-D coordinates.

Each distance-matrix row is treated as a point in N-dimensional Euclidean
space. Conditional Gaussian affinities are calibrated per point by
bisection so their perplexity matches the target, symmetrised, and the
Kullback-Leibler divergence to Student-t (1 dof) low-dimensional
affinities is minimised by gradient descent with momentum and per-
parameter gains, with early exaggeration of the input affinities.

The gradient is exact (dense O(M^2)) when theta = 0 and Barnes-Hut
approximated otherwise; in the approximate regime input affinities are
sparse over the 3*perplexity nearest neighbours of each point, the
standard Barnes-Hut treatment.

Determinism: initial coordinates come from a seeded RandomState, every
accumulation runs in a fixed order, and worker counts do not enter the
arithmetic, so a fixed (input, params) pair reproduces coordinates
bit-for-bit on the same build. Bit-equality across different BLAS builds
or thread counts is not promised.
"""

from __future__ import annotations

import math
import struct
from dataclasses import asdict, dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import _bh
from ._util import atomic_write_bytes
from ._validation import as_matrix
from .errors import DomainError, NumericalError, SchemaVersionError

PVEM_MAGIC = b"PVEM"
PVEM_VERSION = 1

AFFINITY_FLOOR = 1e-12  # floor for q denominators and log arguments
CALIBRATION_TOL = 1e-5  # |realised - target| log-perplexity
CALIBRATION_MAX_STEPS = 50
INIT_STDDEV = 1e-4
BH_THRESHOLD = 5000  # default theta switches to 0.5 above this many points


@dataclass(frozen=True)
class TsneParams:
    """Hyperparameters; ``learning_rate="auto"`` resolves to max(M/12, 50)
    and ``theta=None`` resolves to 0.5 for M > 5000, else 0 (exact)."""

    perplexity: float = 30.0
    iterations: int = 1000
    early_exaggeration_factor: float = 12.0
    early_exaggeration_iters: int = 250
    learning_rate: float | str = "auto"
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    seed: int = 0
    theta: float | None = None

    def __post_init__(self):
        if self.perplexity <= 0:
            raise DomainError(f"perplexity must be positive, got {self.perplexity}")
        if self.iterations < 1:
            raise DomainError("iterations must be >= 1")
        if self.early_exaggeration_factor <= 0:
            raise DomainError("early exaggeration factor must be positive")
        if self.early_exaggeration_iters < 0:
            raise DomainError("early exaggeration iteration count must be >= 0")
        if self.iterations < self.early_exaggeration_iters:
            raise DomainError("iterations must cover the early-exaggeration phase")
        for m in (self.momentum_initial, self.momentum_final):
            if not 0 <= m < 1:
                raise DomainError(f"momentum must lie in [0, 1), got {m}")
        if self.learning_rate != "auto" and (
            not isinstance(self.learning_rate, (int, float)) or self.learning_rate <= 0
        ):
            raise DomainError(f"learning rate must be 'auto' or positive, got {self.learning_rate}")
        if self.theta is not None and not 0 <= self.theta <= 1:
            raise DomainError(f"theta must lie in [0, 1], got {self.theta}")

    def resolve(self, n_points: int) -> "TsneParams":
        """Fill in the data-dependent defaults for an M-point run."""
        lr = self.learning_rate
        if lr == "auto":
            lr = max(n_points / 12.0, 50.0)
        theta = self.theta
        if theta is None:
            theta = 0.5 if n_points > BH_THRESHOLD else 0.0
        return replace(self, learning_rate=float(lr), theta=float(theta))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Embedding:
    """M x 2 plane coordinates (f32) with provenance: the params used, the
    anchor hash of the input matrix, and the KL objective before/after."""

    coords: np.ndarray
    params: TsneParams
    anchor_hash: bytes
    kl_start: float
    kl_final: float

    def __len__(self) -> int:
        return self.coords.shape[0]

    def __eq__(self, other):
        return (
            isinstance(other, Embedding)
            and self.params == other.params
            and self.anchor_hash == other.anchor_hash
            and np.array_equal(self.coords, other.coords)
            and self.kl_start == other.kl_start
            and self.kl_final == other.kl_final
        )


def _pairwise_sq_dists(X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
    """Squared Euclidean distances via the quadratic expansion, clamped at 0."""
    Y = X if Y is None else Y
    sq_x = np.einsum("ij,ij->i", X, X)
    sq_y = np.einsum("ij,ij->i", Y, Y)
    d2 = sq_x[:, None] + sq_y[None, :] - 2.0 * (X @ Y.T)
    np.maximum(d2, 0.0, out=d2)
    return d2


def _calibrate_row(d2_row: np.ndarray, target_entropy: float) -> tuple[np.ndarray, float]:
    """Bisection on the Gaussian precision so the row's Shannon entropy (in
    nats) hits the target; returns (conditional p over the row, entropy).

    Shifting distances by their minimum leaves the normalised affinities
    unchanged and keeps the exponentials in range. If the target cannot be
    reached (all distances equal, say), the best precision found within
    the step budget is used.
    """
    d2 = d2_row - d2_row.min()
    beta, beta_lo, beta_hi = 1.0, 0.0, math.inf
    best = (math.inf, 1.0)
    p = np.exp(-d2)
    for _ in range(CALIBRATION_MAX_STEPS):
        np.exp(-d2 * beta, out=p)
        total = p.sum()
        entropy = math.log(total) + beta * float(np.dot(d2, p)) / total
        diff = entropy - target_entropy
        if abs(diff) < abs(best[0]):
            best = (diff, beta)
        if abs(diff) < CALIBRATION_TOL:
            break
        if diff > 0:  # entropy too high -> sharpen
            beta_lo = beta
            beta = beta * 2.0 if beta_hi is math.inf else (beta + beta_hi) / 2.0
        else:
            beta_hi = beta
            beta = beta / 2.0 if beta_lo == 0.0 else (beta + beta_lo) / 2.0
    else:
        beta = best[1]
        np.exp(-d2 * beta, out=p)
    return p / p.sum(), beta


def conditional_affinities(d2: np.ndarray, perplexity: float) -> np.ndarray:
    """Row-stochastic p(j|i) with per-point bandwidths calibrated to the
    target perplexity; the diagonal is zero."""
    m = d2.shape[0]
    target = math.log(perplexity)
    P = np.zeros((m, m), dtype=np.float64)
    idx = np.arange(m)
    for i in range(m):
        others = np.concatenate([idx[:i], idx[i + 1 :]])
        p_row, _ = _calibrate_row(d2[i, others], target)
        P[i, others] = p_row
    return P


def joint_affinities(d2: np.ndarray, perplexity: float) -> np.ndarray:
    """Symmetrised affinities p_ij = (p(j|i) + p(i|j)) / 2M; sums to 1."""
    P = conditional_affinities(d2, perplexity)
    return (P + P.T) / (2.0 * d2.shape[0])


def _knn_brute(X: np.ndarray, k: int, chunk: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """k nearest neighbours (excluding self) by chunked brute force;
    suitable for the high-dimensional anchor rows where trees degenerate.
    Ties are broken by index so the result is reproducible."""
    m = X.shape[0]
    nn_idx = np.empty((m, k), dtype=np.int64)
    nn_d2 = np.empty((m, k), dtype=np.float64)
    sq = np.einsum("ij,ij->i", X, X)
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (X[start:stop] @ X.T)
        np.maximum(d2, 0.0, out=d2)
        d2[np.arange(stop - start), np.arange(start, stop)] = np.inf
        part = np.argpartition(d2, k - 1, axis=1)[:, :k]
        part_d2 = np.take_along_axis(d2, part, axis=1)
        order = np.lexsort((part, part_d2), axis=1)
        nn_idx[start:stop] = np.take_along_axis(part, order, axis=1)
        nn_d2[start:stop] = np.take_along_axis(part_d2, order, axis=1)
    return nn_idx, nn_d2


def _calibrate_knn(nn_d2: np.ndarray, perplexity: float) -> np.ndarray:
    """Vectorised bisection over all rows of a kNN distance table."""
    m, k = nn_d2.shape
    target = math.log(perplexity)
    d2 = nn_d2 - nn_d2.min(axis=1, keepdims=True)
    beta = np.ones(m)
    beta_lo = np.zeros(m)
    beta_hi = np.full(m, np.inf)
    best_diff = np.full(m, np.inf)
    best_beta = np.ones(m)
    for _ in range(CALIBRATION_MAX_STEPS):
        p = np.exp(-d2 * beta[:, None])
        total = p.sum(axis=1)
        entropy = np.log(total) + beta * np.einsum("ij,ij->i", d2, p) / total
        diff = entropy - target
        better = np.abs(diff) < np.abs(best_diff)
        best_diff = np.where(better, diff, best_diff)
        best_beta = np.where(better, beta, best_beta)
        unconverged = np.abs(diff) >= CALIBRATION_TOL
        if not unconverged.any():
            break
        go_up = (diff > 0) & unconverged
        go_dn = (diff <= 0) & unconverged
        beta_lo = np.where(go_up, beta, beta_lo)
        beta_hi = np.where(go_dn, beta, beta_hi)
        beta = np.where(
            go_up, np.where(np.isinf(beta_hi), beta * 2.0, (beta + beta_hi) / 2.0), beta
        )
        beta = np.where(
            go_dn, np.where(beta_lo == 0.0, beta / 2.0, (beta + beta_lo) / 2.0), beta
        )
    # converged rows have best_beta == their converged beta; the rest fall
    # back to the best bandwidth seen within the step budget
    p = np.exp(-d2 * best_beta[:, None])
    return p / p.sum(axis=1, keepdims=True)


def sparse_joint_affinities(X: np.ndarray, perplexity: float) -> sp.csr_matrix:
    """Symmetrised kNN affinities over 3*perplexity neighbours per point."""
    m = X.shape[0]
    k = min(m - 1, max(1, int(3 * perplexity)))
    nn_idx, nn_d2 = _knn_brute(X, k)
    p_cond = _calibrate_knn(nn_d2, perplexity)
    rows = np.repeat(np.arange(m), k)
    C = sp.csr_matrix((p_cond.ravel(), (rows, nn_idx.ravel())), shape=(m, m))
    P = (C + C.T) / (2.0 * m)
    P.sort_indices()
    return P


def _student_t_q(Y: np.ndarray) -> tuple[np.ndarray, float]:
    """Unnormalised Student-t affinities q'_ij = 1/(1+d2) with zero
    diagonal, plus their total Z."""
    num = 1.0 / (1.0 + _pairwise_sq_dists(Y))
    np.fill_diagonal(num, 0.0)
    return num, float(num.sum())


def kl_divergence(pij, coords) -> float:
    """KL(P || Q) with Q from the Student-t kernel over the coordinates.

    Accepts a dense array or scipy sparse matrix for P; terms with
    p_ij = 0 contribute nothing, and q is floored to avoid log(0).
    """
    Y = np.asarray(coords, dtype=np.float64)
    if sp.issparse(pij):
        P = pij.tocoo()
        d2 = ((Y[P.row] - Y[P.col]) ** 2).sum(axis=1)
        qnum = 1.0 / (1.0 + d2)
        # Z must count *all* pairs, not only the sparse support
        z = _chunked_z(Y)
        q = np.maximum(qnum / z, AFFINITY_FLOOR)
        p = P.data
        mask = p > 0
        return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))
    P = np.asarray(pij, dtype=np.float64)
    num, z = _student_t_q(Y)
    q = np.maximum(num / max(z, AFFINITY_FLOOR), AFFINITY_FLOOR)
    mask = P > 0
    return float(np.sum(P[mask] * np.log(P[mask] / q[mask])))


def _chunked_z(Y: np.ndarray, chunk: int = 512) -> float:
    """Exact sum of q'_ij over all i != j without materialising M x M."""
    m = Y.shape[0]
    sq = np.einsum("ij,ij->i", Y, Y)
    total = 0.0
    for start in range(0, m, chunk):
        stop = min(start + chunk, m)
        d2 = sq[start:stop, None] + sq[None, :] - 2.0 * (Y[start:stop] @ Y.T)
        np.maximum(d2, 0.0, out=d2)
        block = 1.0 / (1.0 + d2)
        block[np.arange(stop - start), np.arange(start, stop)] = 0.0
        total += float(block.sum())
    return max(total, AFFINITY_FLOOR)


def kl_gradient(pij, coords) -> np.ndarray:
    """Exact analytic gradient of the KL objective w.r.t. the coordinates:
    dC/dy_i = 4 sum_j (p_ij - q_ij) q'_ij (y_i - y_j)."""
    Y = np.asarray(coords, dtype=np.float64)
    P = pij.toarray() if sp.issparse(pij) else np.asarray(pij, dtype=np.float64)
    num, z = _student_t_q(Y)
    Q = num / max(z, AFFINITY_FLOOR)
    PQd = (P - Q) * num
    return 4.0 * (PQd.sum(axis=1)[:, None] * Y - PQd @ Y)


def tsne_embed(m, params: TsneParams | None = None, anchor_hash: bytes | None = None) -> Embedding:
    """Embed distance-matrix rows into the plane.

    Accepts a DistanceMatrix or any (M, N) array. Requires M >= 4 and
    perplexity < (M - 1) / 3. Deterministic for fixed input and params on
    a given build. Raises NumericalError (with the iteration index) if the
    optimisation produces non-finite values.
    """
    params = params or TsneParams()
    X = as_matrix(m)
    n_points = X.shape[0]
    if n_points < 4:
        raise DomainError(f"t-SNE needs at least 4 points, got {n_points}")
    if params.perplexity >= (n_points - 1) / 3.0:
        raise DomainError(
            f"perplexity {params.perplexity} too large for {n_points} points; "
            f"needs perplexity < (M - 1) / 3 = {(n_points - 1) / 3.0:.2f}"
        )
    resolved = params.resolve(n_points)
    if anchor_hash is None:
        anchor_hash = getattr(m, "anchor_hash", b"\x00" * 32)

    exact = resolved.theta == 0.0
    if exact:
        P = joint_affinities(_pairwise_sq_dists(X), resolved.perplexity)
    else:
        P = sparse_joint_affinities(X, resolved.perplexity)

    rs = np.random.RandomState(resolved.seed)
    Y = rs.randn(n_points, 2) * INIT_STDDEV

    kl_start = kl_divergence(P, Y)

    exaggerating = resolved.early_exaggeration_iters > 0
    P_work = P * resolved.early_exaggeration_factor if exaggerating else P

    velocity = np.zeros_like(Y)
    gains = np.ones_like(Y)
    lr = resolved.learning_rate
    for it in range(1, resolved.iterations + 1):
        if exact:
            grad = kl_gradient(P_work, Y)
        else:
            grad, _ = _bh.bh_gradient(Y, P_work, resolved.theta)
        if not np.all(np.isfinite(grad)):
            raise NumericalError(f"non-finite gradient at iteration {it}", iteration=it)
        momentum = resolved.momentum_initial if it <= resolved.early_exaggeration_iters \
            else resolved.momentum_final
        flips = np.sign(grad) != np.sign(velocity)
        gains = np.where(flips, gains + 0.2, gains * 0.8)
        np.maximum(gains, 0.01, out=gains)
        velocity = momentum * velocity - lr * (gains * grad)
        Y += velocity
        Y -= Y.mean(axis=0)
        if not np.all(np.isfinite(Y)):
            raise NumericalError(f"non-finite coordinates at iteration {it}", iteration=it)
        if exaggerating and it == resolved.early_exaggeration_iters:
            P_work = P
            exaggerating = False

    kl_final = kl_divergence(P, Y)
    return Embedding(
        coords=Y.astype(np.float32),
        params=resolved,
        anchor_hash=anchor_hash,
        kl_start=float(kl_start),
        kl_final=float(kl_final),
    )


def trustworthiness(high, low, k: int) -> float:
    """Fraction-style score in [0, 1] penalising points that enter a
    low-dimensional k-neighbourhood without being high-dimensional
    neighbours; 1 means local structure is perfectly preserved.

    Ranks use stable index tie-breaking so the score is reproducible.
    """
    X = as_matrix(high)
    Y = np.asarray(getattr(low, "coords", low), dtype=np.float64)
    m = X.shape[0]
    if Y.shape[0] != m:
        raise DomainError("high and low point counts differ")
    if not 1 <= k < m / 2:
        raise DomainError(f"k must satisfy 1 <= k < M/2, got k={k}, M={m}")

    d_high = _pairwise_sq_dists(X)
    d_low = _pairwise_sq_dists(Y)
    np.fill_diagonal(d_high, np.inf)
    np.fill_diagonal(d_low, np.inf)

    order_high = np.argsort(d_high, axis=1, kind="stable")
    ranks_high = np.empty_like(order_high)
    cols = np.arange(m)
    for i in range(m):
        ranks_high[i, order_high[i]] = cols  # 0-based rank among the others
    knn_low = np.argsort(d_low, axis=1, kind="stable")[:, :k]

    penalty = 0
    for i in range(m):
        r = ranks_high[i, knn_low[i]]
        penalty += int(np.sum(np.maximum(r - (k - 1), 0)))
    return 1.0 - (2.0 / (m * k * (2.0 * m - 3.0 * k - 1.0))) * penalty


def save_embedding(e: Embedding, path) -> None:
    """PVEM binary layout: magic, version u16, M u64, M x 2 f32 coords
    (little-endian), a length-prefixed JSON params block (includes the KL
    endpoints), then the 32-byte anchor hash."""
    from ._util import canonical_json

    params_block = canonical_json(
        {"params": e.params.to_dict(), "kl_start": e.kl_start, "kl_final": e.kl_final}
    ).encode("utf-8")
    parts = [
        PVEM_MAGIC,
        struct.pack("<HQ", PVEM_VERSION, e.coords.shape[0]),
        np.ascontiguousarray(e.coords, dtype="<f4").tobytes(),
        struct.pack("<I", len(params_block)),
        params_block,
        e.anchor_hash,
    ]
    atomic_write_bytes(path, b"".join(parts))


def load_embedding(path) -> Embedding:
    import json

    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != PVEM_MAGIC:
        raise SchemaVersionError(f"{path}: not a PVEM embedding file")
    version, rows = struct.unpack_from("<HQ", data, 4)
    if version != PVEM_VERSION:
        raise SchemaVersionError(f"{path}: unsupported PVEM version {version}")
    offset = 4 + struct.calcsize("<HQ")
    coords = np.frombuffer(data, dtype="<f4", count=rows * 2, offset=offset)
    coords = coords.reshape(rows, 2).astype(np.float32)
    offset += rows * 8
    (blob_len,) = struct.unpack_from("<I", data, offset)
    offset += 4
    blob = json.loads(data[offset : offset + blob_len].decode("utf-8"))
    offset += blob_len
    anchor_hash = data[offset : offset + 32]
    params = TsneParams(**blob["params"])
    return Embedding(
        coords=coords,
        params=params,
        anchor_hash=anchor_hash,
        kl_start=blob["kl_start"],
        kl_final=blob["kl_final"],
    )
