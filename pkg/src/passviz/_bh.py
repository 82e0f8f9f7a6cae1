"""Barnes-Hut quadtree kernels for the t-SNE repulsive forces.

The tree is rebuilt every iteration from scratch: points are inserted in
index order, traversals visit children in a fixed order, and all
accumulation happens in f64, so repeated runs on the same machine produce
bit-identical forces.

Exactly coincident points are aggregated into one leaf bucket instead of
splitting forever; beyond MAX_DEPTH near-coincident points are bucketed
too (their centre of mass stands in for the individuals, which is far
below the theta approximation error at that scale).
"""

import numba
import numpy as np

MAX_DEPTH = 64


@numba.njit(cache=True, nogil=True)
def _build_tree(Y, child, sum_pos, mass, center, half):  # pragma: no cover - jitted
    """Insert all points; returns the number of nodes used or -1 on
    capacity overflow (caller retries with bigger arrays)."""
    n = Y.shape[0]
    cap = child.shape[0]

    lo0 = Y[0, 0]
    hi0 = Y[0, 0]
    lo1 = Y[0, 1]
    hi1 = Y[0, 1]
    for i in range(n):
        if Y[i, 0] < lo0:
            lo0 = Y[i, 0]
        if Y[i, 0] > hi0:
            hi0 = Y[i, 0]
        if Y[i, 1] < lo1:
            lo1 = Y[i, 1]
        if Y[i, 1] > hi1:
            hi1 = Y[i, 1]
    side = max(hi0 - lo0, hi1 - lo1)
    root_half = side * 0.5 + 1e-9
    cx = (lo0 + hi0) * 0.5
    cy = (lo1 + hi1) * 0.5

    n_nodes = 1
    center[0, 0] = cx
    center[0, 1] = cy
    half[0] = root_half

    for i in range(n):
        x = Y[i, 0]
        y = Y[i, 1]
        node = 0
        depth = 0
        while True:
            if mass[node] == 0:
                # empty leaf: claim it
                mass[node] = 1
                sum_pos[node, 0] = x
                sum_pos[node, 1] = y
                break
            has_children = child[node, 0] >= 0 or child[node, 1] >= 0 \
                or child[node, 2] >= 0 or child[node, 3] >= 0
            if not has_children:
                ox = sum_pos[node, 0] / mass[node]
                oy = sum_pos[node, 1] / mass[node]
                if (ox == x and oy == y) or depth >= MAX_DEPTH:
                    # coincident (or depth-capped) bucket
                    mass[node] += 1
                    sum_pos[node, 0] += x
                    sum_pos[node, 1] += y
                    break
                # split: push the existing bucket one level down
                q = 0
                if ox >= center[node, 0]:
                    q += 1
                if oy >= center[node, 1]:
                    q += 2
                if n_nodes >= cap:
                    return -1
                c = n_nodes
                n_nodes += 1
                child[node, q] = c
                hh = half[node] * 0.5
                center[c, 0] = center[node, 0] + (hh if q & 1 else -hh)
                center[c, 1] = center[node, 1] + (hh if q & 2 else -hh)
                half[c] = hh
                mass[c] = mass[node]
                sum_pos[c, 0] = sum_pos[node, 0]
                sum_pos[c, 1] = sum_pos[node, 1]
                # node is internal now; fall through to descend with (x, y)
            # internal node: account for the new point and descend
            mass[node] += 1
            sum_pos[node, 0] += x
            sum_pos[node, 1] += y
            q = 0
            if x >= center[node, 0]:
                q += 1
            if y >= center[node, 1]:
                q += 2
            nxt = child[node, q]
            if nxt < 0:
                if n_nodes >= cap:
                    return -1
                nxt = n_nodes
                n_nodes += 1
                child[node, q] = nxt
                hh = half[node] * 0.5
                center[nxt, 0] = center[node, 0] + (hh if q & 1 else -hh)
                center[nxt, 1] = center[node, 1] + (hh if q & 2 else -hh)
                half[nxt] = hh
            node = nxt
            depth += 1
    return n_nodes


@numba.njit(cache=True, nogil=True)
def _repulsion(Y, child, sum_pos, mass, half, theta, rep, stack):  # pragma: no cover - jitted
    """Approximate repulsive numerators and the q' normaliser.

    For each point: rep_i = sum_j q'_ij^2 (y_i - y_j) over summarised
    cells, and the running Z = sum_j q'_ij; returns total Z over all i.
    Cells pass the opening test when (cell width / distance) < theta; a
    leaf bucket at distance zero is the point's own bucket, contributing
    (count - 1) coincident neighbours with q' = 1 and zero net force.
    """
    n = Y.shape[0]
    theta2 = theta * theta
    z_total = 0.0
    for i in range(n):
        x = Y[i, 0]
        y = Y[i, 1]
        sp = 0
        stack[sp] = 0
        sp += 1
        while sp > 0:
            sp -= 1
            node = stack[sp]
            m = mass[node]
            if m == 0:
                continue
            comx = sum_pos[node, 0] / m
            comy = sum_pos[node, 1] / m
            dx = x - comx
            dy = y - comy
            d2 = dx * dx + dy * dy
            is_leaf = child[node, 0] < 0 and child[node, 1] < 0 \
                and child[node, 2] < 0 and child[node, 3] < 0
            width = 2.0 * half[node]
            if is_leaf or width * width < theta2 * d2:
                if d2 == 0.0:
                    if is_leaf:
                        z_total += m - 1.0  # own bucket: q' = 1 for the others
                        continue
                    # internal cell whose com coincides with the point:
                    # cannot summarise, open it
                else:
                    q = 1.0 / (1.0 + d2)
                    z_total += m * q
                    coef = m * q * q
                    rep[i, 0] += coef * dx
                    rep[i, 1] += coef * dy
                    continue
            for k in range(4):
                c = child[node, k]
                if c >= 0:
                    stack[sp] = c
                    sp += 1
    return z_total


@numba.njit(cache=True, nogil=True)
def _attraction(Y, indptr, indices, data, attr):  # pragma: no cover - jitted
    """attr_i = sum_j p_ij q'_ij (y_i - y_j) over the sparse affinities."""
    n = Y.shape[0]
    for i in range(n):
        xi = Y[i, 0]
        yi = Y[i, 1]
        ax = 0.0
        ay = 0.0
        for ptr in range(indptr[i], indptr[i + 1]):
            j = indices[ptr]
            dx = xi - Y[j, 0]
            dy = yi - Y[j, 1]
            w = data[ptr] / (1.0 + dx * dx + dy * dy)
            ax += w * dx
            ay += w * dy
        attr[i, 0] = ax
        attr[i, 1] = ay


def bh_gradient(Y: np.ndarray, P_csr, theta: float) -> tuple[np.ndarray, float]:
    """Barnes-Hut KL gradient: 4 * (attraction - repulsion / Z).

    Also returns the tree-approximated Z so callers can monitor it.
    """
    n = Y.shape[0]
    cap = max(16 * n, 2048)
    while True:
        child = np.full((cap, 4), -1, dtype=np.int32)
        sum_pos = np.zeros((cap, 2), dtype=np.float64)
        mass = np.zeros(cap, dtype=np.int64)
        center = np.zeros((cap, 2), dtype=np.float64)
        half = np.zeros(cap, dtype=np.float64)
        used = _build_tree(Y, child, sum_pos, mass, center, half)
        if used != -1:
            break
        cap *= 2

    rep = np.zeros((n, 2), dtype=np.float64)
    stack = np.empty(4 * MAX_DEPTH + 16, dtype=np.int32)
    z_total = _repulsion(Y, child, sum_pos, mass, half, theta, rep, stack)
    z_total = max(z_total, 1e-12)

    attr = np.zeros((n, 2), dtype=np.float64)
    _attraction(Y, P_csr.indptr, P_csr.indices, P_csr.data, attr)
    return 4.0 * (attr - rep / z_total), z_total
