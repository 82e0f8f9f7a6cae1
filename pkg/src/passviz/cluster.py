"""Clustering of 2-D embeddings: k-means, DBSCAN, OPTICS, and per-cluster
summaries (centre-most password, majority length).

All tie-breaks are index-ordered so assignments are deterministic, and
every method reports noise as label -1 (k-means never does).
"""

from __future__ import annotations

import heapq
from collections import Counter, deque
from dataclasses import dataclass

import numpy as np

from ._validation import as_coords, as_texts, check_positive_int
from .errors import DomainError


@dataclass(frozen=True, eq=False)
class ClusterAssignment:
    """Per-point labels plus the parameters that produced them.

    labels[i] is -1 for noise or a 0-based cluster id; centroids[c] is the
    mean of the coordinates assigned to cluster c.
    """

    labels: np.ndarray
    method: str
    params_used: dict
    centroids: np.ndarray

    @property
    def n_clusters(self) -> int:
        return self.centroids.shape[0]

    def cluster_ids(self) -> list[int]:
        return sorted(set(self.labels.tolist()) - {-1})

    def __eq__(self, other):
        return (
            isinstance(other, ClusterAssignment)
            and self.method == other.method
            and np.array_equal(self.labels, other.labels)
        )


def _finish(labels: np.ndarray, coords: np.ndarray, method: str, params: dict) -> ClusterAssignment:
    """Validate labels and recompute centroids as per-cluster means."""
    labels = np.asarray(labels, dtype=np.int64)
    ids = sorted(set(labels.tolist()) - {-1})
    if ids and (min(ids) < 0 or max(ids) != len(ids) - 1):
        raise DomainError(f"cluster ids must be contiguous from 0, got {ids}")
    centroids = np.zeros((len(ids), 2), dtype=np.float64)
    for c in ids:
        centroids[c] = coords[labels == c].mean(axis=0)
    return ClusterAssignment(labels=labels, method=method, params_used=params, centroids=centroids)


# ---------------------------------------------------------------------------
# k-means


def _kmeans_pp_init(coords: np.ndarray, k: int, rs: np.random.RandomState) -> np.ndarray:
    """k-means++ seeding; falls back to the first unchosen point when all
    remaining squared distances are zero (duplicate-heavy data)."""
    m = coords.shape[0]
    centers = np.empty((k, 2), dtype=np.float64)
    chosen = np.zeros(m, dtype=bool)
    first = int(rs.randint(m))
    centers[0] = coords[first]
    chosen[first] = True
    d2 = ((coords - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = int(np.flatnonzero(~chosen)[0])
        else:
            r = rs.rand() * total
            idx = int(np.searchsorted(np.cumsum(d2), r))
            idx = min(idx, m - 1)
        centers[c] = coords[idx]
        chosen[idx] = True
        d2 = np.minimum(d2, ((coords - centers[c]) ** 2).sum(axis=1))
    return centers


def kmeans(e, k: int, seed: int = 0, max_iter: int = 300) -> ClusterAssignment:
    """Lloyd iterations from a k-means++ seeding until the assignment stops
    changing (or max_iter). An emptied cluster is re-seeded with the point
    farthest from its currently assigned centroid. Deterministic for a
    fixed seed; assignment ties go to the lowest cluster id.
    """
    coords = as_coords(e)
    m = coords.shape[0]
    check_positive_int(k, "k")
    if k > m:
        raise DomainError(f"k = {k} exceeds the number of points ({m})")
    rs = np.random.RandomState(seed)
    centers = _kmeans_pp_init(coords, k, rs)

    labels = np.full(m, -1, dtype=np.int64)
    inertia_history: list[float] = []
    for _ in range(max_iter):
        d2 = ((coords[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = d2.argmin(axis=1)

        # repair empty clusters before accepting the assignment
        for c in range(k):
            if not (new_labels == c).any():
                assigned_d2 = d2[np.arange(m), new_labels]
                farthest = int(assigned_d2.argmax())
                centers[c] = coords[farthest]
                new_labels[farthest] = c
                d2[farthest, :] = 0.0  # cannot be stolen by another repair

        inertia = float(((coords - centers[new_labels]) ** 2).sum())
        inertia_history.append(inertia)
        if (new_labels == labels).all():
            break
        labels = new_labels
        for c in range(k):
            members = coords[labels == c]
            if len(members):
                centers[c] = members.mean(axis=0)

    params = {"k": k, "seed": seed, "max_iter": max_iter, "inertia": inertia_history[-1],
              "inertia_history": inertia_history}
    return _finish(labels, coords, "kmeans", params)


# ---------------------------------------------------------------------------
# DBSCAN


def _neighbors_naive(coords: np.ndarray, eps: float) -> list[np.ndarray]:
    d2 = ((coords[:, None, :] - coords[None, :, :]) ** 2).sum(axis=2)
    eps2 = eps * eps
    return [np.flatnonzero(row <= eps2) for row in d2]


def _neighbors_grid(coords: np.ndarray, eps: float) -> list[np.ndarray]:
    """Neighbourhoods via a uniform grid bucketed at eps: only the 3 x 3
    cell patch around a point can contain its eps-neighbours. Must agree
    exactly with the naive scan."""
    eps2 = eps * eps
    cells: dict[tuple[int, int], list[int]] = {}
    cx = np.floor(coords[:, 0] / eps).astype(np.int64)
    cy = np.floor(coords[:, 1] / eps).astype(np.int64)
    for i, key in enumerate(zip(cx.tolist(), cy.tolist())):
        cells.setdefault(key, []).append(i)
    out = []
    for i in range(coords.shape[0]):
        cand: list[int] = []
        for dx in (-1, 0, 1):
            for dy in (-1, 0, 1):
                cand.extend(cells.get((cx[i] + dx, cy[i] + dy), ()))
        cand_arr = np.array(sorted(cand), dtype=np.int64)
        d2 = ((coords[cand_arr] - coords[i]) ** 2).sum(axis=1)
        out.append(cand_arr[d2 <= eps2])
    return out


def dbscan(e, eps: float, min_pts: int, index: str = "grid") -> ClusterAssignment:
    """Density-reachability clustering: points with >= min_pts neighbours
    within eps (self included) are cores; clusters grow from unvisited
    cores in index order, so border points join the first core cluster
    that reaches them. Remaining points are noise (-1).
    """
    coords = as_coords(e)
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    check_positive_int(min_pts, "min_pts")
    if index not in ("grid", "naive"):
        raise DomainError(f"unknown neighbour index {index!r}")
    neigh = (_neighbors_grid if index == "grid" else _neighbors_naive)(coords, eps)

    m = coords.shape[0]
    labels = np.full(m, -1, dtype=np.int64)
    core = np.array([len(n) >= min_pts for n in neigh])
    cluster = 0
    for i in range(m):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            p = queue.popleft()
            for q in neigh[p]:
                if labels[q] == -1:
                    labels[q] = cluster
                    if core[q]:
                        queue.append(int(q))
        cluster += 1
    params = {"eps": eps, "min_pts": min_pts, "index": index, "n_core": int(core.sum())}
    return _finish(labels, coords, "dbscan", params)


# ---------------------------------------------------------------------------
# OPTICS


def _optics_order(coords: np.ndarray, min_pts: int) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Reachability ordering: repeatedly expand the unprocessed point with
    the smallest reachability (index tie-break), updating neighbours with
    max(core distance, distance). Distance rows are computed on demand, so
    memory stays O(M). Returns (order, reachability, core distances)."""
    m = coords.shape[0]
    reach = np.full(m, np.inf)
    core = np.full(m, np.inf)
    processed = np.zeros(m, dtype=bool)
    order: list[int] = []
    for start in range(m):
        if processed[start]:
            continue
        seeds: list[tuple[float, int]] = [(np.inf, start)]
        while seeds:
            _, p = heapq.heappop(seeds)
            if processed[p]:
                continue
            processed[p] = True
            order.append(p)
            d = np.sqrt(((coords - coords[p]) ** 2).sum(axis=1))
            if m >= min_pts:
                core[p] = np.partition(d, min_pts - 1)[min_pts - 1]
            if np.isfinite(core[p]):
                candidate = np.maximum(d, core[p])
                better = ~processed & (candidate < reach)
                reach[better] = candidate[better]
                for q in np.flatnonzero(better):
                    heapq.heappush(seeds, (float(reach[q]), int(q)))
    return order, reach, core


def _extend_steep(plot: np.ndarray, start: int, xi: float, max_flat: int, upward: bool) -> int:
    """Last steep edge of the steep area beginning at edge `start`; up to
    `max_flat` consecutive merely non-reversing edges may be crossed."""
    n = len(plot)
    end = start
    j = start
    flat = 0
    while j < n - 1:
        a, b = plot[j], plot[j + 1]
        steep = (a <= b * (1 - xi)) if upward else (b <= a * (1 - xi))
        keeps = (a <= b) if upward else (b <= a)
        if steep:
            end = j
            flat = 0
        elif keeps:
            flat += 1
            if flat > max_flat:
                break
        else:
            break
        j += 1
    return end


def _xi_extract(plot: np.ndarray, xi: float, min_cluster: int) -> list[tuple[int, int]]:
    """Cluster intervals [s, e] on the ordered reachability plot.

    Follows the steep-area construction: a steep-down area paired with a
    later steep-up area bounds a cluster when the maximum reachability in
    between stays a factor (1 - xi) below the closing boundary; boundary
    points above the lower of the two edges are trimmed off. No virtual
    steep-up is added at the end of the plot, so data that never climbs
    back (uniform scatter under a large xi) yields no clusters at all.
    """
    n = len(plot)
    clusters: list[tuple[int, int]] = []
    sdas: list[dict] = []
    mib = 0.0
    index = 0
    while index < n - 1:
        mib = max(mib, float(plot[index]))
        if plot[index + 1] <= plot[index] * (1 - xi):  # steep down starts
            sdas = [d for d in sdas if plot[d["start"]] * (1 - xi) >= mib]
            for d in sdas:
                d["mib"] = max(d["mib"], mib)
            end = _extend_steep(plot, index, xi, min_cluster, upward=False)
            sdas.append({"start": index, "end": end, "mib": 0.0})
            index = end + 1
            mib = float(plot[index])
        elif plot[index] <= plot[index + 1] * (1 - xi):  # steep up starts
            sdas = [d for d in sdas if plot[d["start"]] * (1 - xi) >= mib]
            for d in sdas:
                d["mib"] = max(d["mib"], mib)
            u_start = index
            end = _extend_steep(plot, index, xi, min_cluster, upward=True)
            index = end + 1
            mib = float(plot[index])
            top = end + 1  # the point reached after climbing
            for d in sdas:
                if d["mib"] > plot[top] * (1 - xi):
                    continue
                s, e = d["start"], top
                r_start, r_top = plot[d["start"]], plot[top]
                if r_start * (1 - xi) >= r_top:
                    # left boundary much higher: trim D points above the top
                    inside = [i for i in range(d["start"], d["end"] + 2) if plot[i] > r_top]
                    if inside:
                        s = max(inside)
                elif r_top * (1 - xi) >= r_start:
                    # right boundary much higher: trim U points above the start
                    above = [i for i in range(u_start, top + 1) if plot[i] > r_start]
                    if above:
                        e = min(above) - 1
                if e - s + 1 >= max(min_cluster, 2):
                    clusters.append((s, e))
        else:
            index += 1
    return clusters


def _eps_cut(order: list[int], reach: np.ndarray, core: np.ndarray, eps: float) -> np.ndarray:
    """DBSCAN-equivalent extraction at radius eps from an OPTICS ordering."""
    labels = np.full(len(order), -1, dtype=np.int64)
    cid = -1
    for p in order:
        if reach[p] > eps:
            if core[p] <= eps:
                cid += 1
                labels[p] = cid
        elif cid >= 0:
            labels[p] = cid
    return labels


def optics(e, min_pts: int, xi: float = 0.05, method: str = "xi",
           eps: float | None = None) -> ClusterAssignment:
    """OPTICS reachability ordering with xi-based extraction by default;
    ``method="eps-cut"`` extracts DBSCAN-equivalent clusters at ``eps``
    instead. Points claimed by no cluster are noise. The reachability plot
    data (reachability per point plus the processing order) is kept in
    params_used for inspection.

    Flat labels come from applying extracted intervals smallest-first, so
    a containing cluster wins over the fragments inside it.
    """
    coords = as_coords(e)
    if min_pts < 2:
        raise DomainError(f"min_pts must be >= 2 for OPTICS, got {min_pts}")
    if not 0 < xi < 1:
        raise DomainError(f"xi must lie in (0, 1), got {xi}")
    if method not in ("xi", "eps-cut"):
        raise DomainError(f"unknown OPTICS extraction method {method!r}")

    order, reach, core = _optics_order(coords, min_pts)
    if method == "xi":
        plot = reach[order]
        intervals = sorted(_xi_extract(plot, xi, min_pts), key=lambda se: se[1] - se[0])
        ordered_labels = np.full(len(order), -1, dtype=np.int64)
        for cid, (s, t) in enumerate(intervals):
            ordered_labels[s : t + 1] = cid
        labels = np.full(len(order), -1, dtype=np.int64)
        labels[np.asarray(order)] = ordered_labels
    else:
        if eps is None or eps <= 0:
            raise DomainError("eps-cut extraction needs a positive eps")
        labels = _eps_cut(order, reach, core, eps)

    # compact ids (containment overwrites can swallow whole intervals)
    ids = sorted(set(labels.tolist()) - {-1})
    remap = {old: new for new, old in enumerate(ids)}
    labels = np.array([remap.get(int(l), -1) for l in labels], dtype=np.int64)

    params = {
        "min_pts": min_pts,
        "xi": xi,
        "method": method,
        "eps": eps,
        "reachability": reach.tolist(),
        "ordering": list(order),
    }
    return _finish(labels, coords, "optics", params)


# ---------------------------------------------------------------------------
# per-cluster summaries


def center_passwords(a: ClusterAssignment, e, c) -> dict[int, tuple[str, int]]:
    """For each cluster, the record whose coordinates are closest to the
    cluster centroid (Euclidean); ties go to the lowest record index."""
    coords = as_coords(e)
    texts = as_texts(c)
    if len(texts) != coords.shape[0] or len(a.labels) != coords.shape[0]:
        raise DomainError("assignment, embedding, and corpus are not aligned")
    out: dict[int, tuple[str, int]] = {}
    for cid in a.cluster_ids():
        members = np.flatnonzero(a.labels == cid)
        d2 = ((coords[members] - a.centroids[cid]) ** 2).sum(axis=1)
        best = members[int(d2.argmin())]  # argmin returns the first minimum
        out[cid] = (texts[best], int(best))
    return out


def majority_length_labels(a: ClusterAssignment, c) -> dict[int, tuple[int, float]]:
    """Per cluster: the modal password length and its share of the cluster;
    ties go to the smaller length."""
    texts = as_texts(c)
    if len(texts) != len(a.labels):
        raise DomainError("assignment and corpus are not aligned")
    out: dict[int, tuple[int, float]] = {}
    for cid in a.cluster_ids():
        members = np.flatnonzero(a.labels == cid)
        lengths = Counter(len(texts[i]) for i in members)
        length = min(lengths, key=lambda L: (-lengths[L], L))
        out[cid] = (length, lengths[length] / len(members))
    return out
