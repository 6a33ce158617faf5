"""Small built-in base learners used to produce ensembles for experiments.

They are intentionally weak and cheap: the fusion step only sees their
hard outputs, so what matters is that they disagree in useful ways.
"""

from __future__ import annotations

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.spatial.distance import cdist


def _labels_present(y: np.ndarray) -> np.ndarray:
    return np.unique(y)


def nearest_centroid(x_train, y_train, x_test) -> np.ndarray:
    classes = _labels_present(y_train)
    centroids = np.stack([x_train[y_train == c].mean(axis=0) for c in classes])
    return classes[np.argmin(cdist(x_test, centroids, "sqeuclidean"), axis=1)]


def knn(x_train, y_train, x_test, k: int = 5) -> np.ndarray:
    """Majority vote among the ``k`` nearest training points; ties go to the nearer neighbour."""
    k = min(k, len(x_train))
    d = cdist(x_test, x_train, "sqeuclidean")
    order = np.argsort(d, axis=1, kind="stable")[:, :k]
    votes = y_train[order]
    out = np.empty(len(x_test), dtype=y_train.dtype)
    for i, row in enumerate(votes):
        vals, counts = np.unique(row, return_counts=True)
        winners = set(vals[counts == counts.max()])
        out[i] = next(v for v in row if v in winners)
    return out


def threshold_stump(x_train, y_train, x_test) -> np.ndarray:
    """Single-feature classifier with thresholds between sorted class means.

    Every feature is tried; the one with the best training accuracy wins.
    """
    classes = _labels_present(y_train)
    best = (-1.0, 0, None, None)
    for f in range(x_train.shape[1]):
        means = np.array([x_train[y_train == c, f].mean() for c in classes])
        order = np.argsort(means, kind="stable")
        cuts = (means[order][1:] + means[order][:-1]) / 2.0
        pred = classes[order][np.searchsorted(cuts, x_train[:, f])]
        acc = float(np.mean(pred == y_train))
        if acc > best[0]:
            best = (acc, f, cuts, classes[order])
    _, f, cuts, ordered = best
    return ordered[np.searchsorted(cuts, x_test[:, f])]


def _kmeans_pp(x, k, rng) -> np.ndarray:
    centers = [x[rng.integers(len(x))]]
    d2 = np.sum((x - centers[0]) ** 2, axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers.append(x[rng.integers(len(x))])
        else:
            centers.append(x[rng.choice(len(x), p=d2 / total)])
        d2 = np.minimum(d2, np.sum((x - centers[-1]) ** 2, axis=1))
    return np.array(centers)


def kmeans(x, k: int, seed: int = 0, max_iter: int = 100) -> np.ndarray:
    """Lloyd iterations from a k-means++ start; returns ids ``1..k'`` with ``k' <= k``."""
    rng = np.random.default_rng(seed)
    x = np.asarray(x, dtype=float)
    centers = _kmeans_pp(x, k, rng)
    assign = np.zeros(len(x), dtype=np.int64)
    for it in range(max_iter):
        new = np.argmin(cdist(x, centers, "sqeuclidean"), axis=1)
        if it and np.array_equal(new, assign):
            break
        assign = new
        for c in range(k):
            members = x[assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
    _, ids = np.unique(assign, return_inverse=True)
    return ids + 1


def silhouette(x, ids, max_points: int = 1000, seed: int = 0) -> float:
    """Mean silhouette width, on a random subsample for large inputs."""
    x = np.asarray(x, dtype=float)
    ids = np.asarray(ids)
    if len(x) > max_points:
        pick = np.random.default_rng(seed).choice(len(x), max_points, replace=False)
        x, ids = x[pick], ids[pick]
    labels = np.unique(ids)
    if labels.size < 2:
        return -1.0
    d = cdist(x, x)
    s = np.zeros(len(x))
    for i in range(len(x)):
        own = ids == ids[i]
        n_own = own.sum() - 1
        if n_own == 0:
            continue
        a = d[i, own].sum() / n_own
        b = min(d[i, ids == c].mean() for c in labels if c != ids[i])
        s[i] = (b - a) / max(a, b) if max(a, b) > 0 else 0.0
    return float(s.mean())


def kmeans_auto(x, l: int, seed: int = 0) -> np.ndarray:
    """k-means with ``k`` picked from ``{l-1, l, l+1}`` by silhouette."""
    n = len(x)
    best = None
    for k in (l - 1, l, l + 1):
        if k < 2 or k > n:
            continue
        ids = kmeans(x, k, seed)
        score = silhouette(x, ids, seed=seed)
        if best is None or score > best[0]:
            best = (score, ids)
    if best is None:
        return np.ones(n, dtype=np.int64)
    return best[1]


def single_linkage(x, n_clusters: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return np.ones(len(x), dtype=np.int64)
    tree = linkage(x, method="single")
    return fcluster(tree, t=n_clusters, criterion="maxclust").astype(np.int64)
