"""Slow-timescale stage: group pairs by geographic proximity with spectral
clustering on a Gaussian similarity graph, then hand out the RB pool
orthogonally inside each group (all groups reuse the full pool).

Runs every t0 slots; between refreshes the assignment is frozen.
"""

from __future__ import annotations

import numpy as np


def similarity(midpoints, gamma: float, phi: float,
               area_side: float | None = None) -> np.ndarray:
    """Gaussian similarity with hard cutoff phi.

    f_ij = exp(-d_ij^2 / gamma^2) for d_ij <= phi, else 0.  Distances are
    toroidal when area_side is given.
    """
    pts = np.asarray(midpoints, dtype=float)
    d = pts[:, None, :] - pts[None, :, :]
    if area_side is not None:
        d = (d + area_side / 2) % area_side - area_side / 2
    dist = np.hypot(d[..., 0], d[..., 1])
    f = np.exp(-(dist ** 2) / gamma ** 2)
    f[dist > phi] = 0.0
    return f


def normalized_laplacian(f: np.ndarray) -> np.ndarray:
    """I - D^-1/2 F D^-1/2 with zero-degree rows treated as disconnected."""
    deg = f.sum(axis=1)
    inv_sqrt = np.zeros_like(deg)
    pos = deg > 0
    inv_sqrt[pos] = deg[pos] ** -0.5
    return np.eye(len(f)) - inv_sqrt[:, None] * f * inv_sqrt[None, :]


def _kmeans_pp_init(x: np.ndarray, k: int, rng) -> np.ndarray:
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = x[rng.integers(n)]
        else:
            centers[j] = x[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((x - centers[j]) ** 2, axis=1))
    return centers


def _kmeans(x: np.ndarray, k: int, rng, restarts: int = 20,
            max_iter: int = 100) -> np.ndarray:
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _kmeans_pp_init(x, k, rng)
        labels = np.zeros(len(x), dtype=int)
        for _ in range(max_iter):
            d2 = np.sum((x[:, None, :] - centers[None, :, :]) ** 2, axis=2)
            new_labels = np.argmin(d2, axis=1)
            for j in range(k):
                members = new_labels == j
                if members.any():
                    centers[j] = x[members].mean(axis=0)
                else:  # reseed an empty cluster at the farthest point
                    far = np.argmax(d2[np.arange(len(x)), new_labels])
                    centers[j] = x[far]
                    new_labels[far] = j
            if np.array_equal(new_labels, labels):
                break
            labels = new_labels
        inertia = float(np.sum((x - centers[labels]) ** 2))
        if inertia < best_inertia:
            best_labels, best_inertia = labels.copy(), inertia
    return best_labels


def spectral_cluster(f: np.ndarray, g: int, rng) -> np.ndarray:
    """Group labels from the g smallest eigenvectors of the normalized
    Laplacian, rows normalized, clustered with k-means (k-means++ seeding,
    20 restarts, best inertia).

    Zero-degree vertices embed at the origin; each such isolated pair is
    then moved to its own fresh group, so the label count can exceed g in
    that corner case.
    """
    f = np.asarray(f, dtype=float)
    k_pairs = f.shape[0]
    if g < 2:
        raise ValueError("need at least two groups")
    if k_pairs < g:
        raise ValueError(f"cannot split {k_pairs} pairs into {g} groups")
    lap = normalized_laplacian(f)
    _, vecs = np.linalg.eigh(lap)
    u = vecs[:, :g]
    norms = np.linalg.norm(u, axis=1)
    isolated = f.sum(axis=1) <= f.diagonal()  # no off-diagonal similarity
    safe = np.where(norms > 0, norms, 1.0)
    u = u / safe[:, None]
    labels = _kmeans(u, g, rng)
    next_label = g
    for idx in np.nonzero(isolated)[0]:
        labels[idx] = next_label
        next_label += 1
    return labels


def allocate_rbs(labels, n_rb: int) -> dict[int, np.ndarray]:
    """Round-robin split of the RB pool inside each group.

    Within a group, member pairs (ascending id) take RBs r with
    r mod group_size == member_rank, so lower pair ids get at most one RB
    more.  Groups reuse the full pool; sets within a group are disjoint.
    """
    labels = np.asarray(labels)
    out: dict[int, np.ndarray] = {}
    for grp in np.unique(labels):
        members = np.nonzero(labels == grp)[0]
        m = len(members)
        for rank, pair in enumerate(members):
            out[int(pair)] = np.arange(rank, n_rb, m, dtype=int)
    return out


def rb_usage_matrix(rb_sets: dict[int, np.ndarray], k: int, n_rb: int) -> np.ndarray:
    """(K, N) boolean allocation mask."""
    usage = np.zeros((k, n_rb), dtype=bool)
    for pair, rbs in rb_sets.items():
        usage[pair, rbs] = True
    return usage


def should_recluster(slot: int, t0: int) -> bool:
    return slot % t0 == 0
