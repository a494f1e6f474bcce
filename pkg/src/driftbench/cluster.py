"""Lloyd k-means with k-means++ seeding over sparse document vectors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .textvec import SparseVector


@dataclass
class Clustering:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    inertia_history: list[float] = field(default_factory=list)

    @property
    def k(self) -> int:
        return int(self.centroids.shape[0])


def n_distinct(vectors: list[SparseVector]) -> int:
    """Number of pairwise-distinct vectors under exact entry equality."""
    return len({tuple(sorted(v.entries.items())) for v in vectors})


def _densify(vectors: list[SparseVector]) -> np.ndarray:
    dim = 1
    for v in vectors:
        if v.entries:
            dim = max(dim, max(v.entries) + 1)
    X = np.zeros((len(vectors), dim))
    for row, v in enumerate(vectors):
        for i, w in v.entries.items():
            X[row, i] = w
    return X


def _sq_distances(X: np.ndarray, centers: np.ndarray) -> np.ndarray:
    d2 = (X * X).sum(axis=1)[:, None] - 2.0 * (X @ centers.T) + (centers * centers).sum(axis=1)[None, :]
    np.maximum(d2, 0.0, out=d2)
    return d2


def _plus_plus_init(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[int(rng.integers(n))]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        # k never exceeds the distinct-vector count, so some mass remains
        centers[j] = X[int(rng.choice(n, p=d2 / d2.sum()))]
        d2 = np.minimum(d2, ((X - centers[j]) ** 2).sum(axis=1))
    return centers


def kmeans(vectors: list[SparseVector], k: int, seed: int, max_iter: int = 50) -> Clustering:
    """Cluster vectors into at most k groups.

    k is reduced to the number of distinct vectors when necessary. Assignment
    ties go to the lowest centroid index, and a cluster left empty by an
    assignment pass is reseeded with the point farthest from its own centroid,
    which keeps the recorded inertia non-increasing across iterations.
    """
    if not vectors:
        raise ValueError("kmeans needs at least one vector")
    if k < 1:
        raise ValueError("k must be at least 1")
    X = _densify(vectors)
    n = X.shape[0]
    k_eff = min(k, n_distinct(vectors))
    rng = np.random.default_rng(seed)
    centroids = _plus_plus_init(X, k_eff, rng)

    assignments = None
    history: list[float] = []
    rows = np.arange(n)
    for it in range(max_iter):
        d2 = _sq_distances(X, centroids)
        new_assign = d2.argmin(axis=1)
        sizes = np.bincount(new_assign, minlength=k_eff)
        for j in np.flatnonzero(sizes == 0):
            own = d2[rows, new_assign]
            own = np.where(sizes[new_assign] >= 2, own, -np.inf)
            donor = int(own.argmax())
            sizes[new_assign[donor]] -= 1
            new_assign[donor] = j
            sizes[j] += 1
            centroids[j] = X[donor]
            d2[:, j] = ((X - centroids[j]) ** 2).sum(axis=1)
        history.append(float(d2[rows, new_assign].sum()))
        if assignments is not None and np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        if it == max_iter - 1:
            break
        for j in range(k_eff):
            centroids[j] = X[assignments == j].mean(axis=0)

    return Clustering(assignments, centroids, history[-1], history)
