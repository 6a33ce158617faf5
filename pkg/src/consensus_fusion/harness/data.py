"""Synthetic datasets and ensemble construction for the experiment drivers."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from ..core import EnsembleInput
from ..errors import ValidationError
from . import learners


@dataclass(frozen=True)
class SyntheticSpec:
    """Isotropic unit-variance Gaussian blobs, one per class."""

    n: int
    l: int
    feature_dim: int = 2
    separation: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.l < 2 or self.n < self.l:
            raise ValidationError("need l >= 2 and n >= l")
        if self.feature_dim < 1:
            raise ValidationError("feature_dim must be positive")
        if not self.separation > 0:
            raise ValidationError("separation must be positive")

    def to_dict(self) -> dict:
        return asdict(self)


PRESETS: dict[str, SyntheticSpec] = {
    "blobs3": SyntheticSpec(n=600, l=3, feature_dim=2, separation=3.0),
    "iris": SyntheticSpec(n=150, l=3, feature_dim=4, separation=4.0),
    "blobs2": SyntheticSpec(n=600, l=2, feature_dim=2, separation=2.5),
}


def _centers(l: int, d: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    if d >= l:
        # scaled basis vectors: every pair exactly `separation` apart
        return np.eye(l, d) * (separation / np.sqrt(2.0))
    c = rng.normal(size=(l, d))
    diff = c[:, None, :] - c[None, :, :]
    dist = np.sqrt((diff**2).sum(axis=-1))
    dist[np.diag_indices(l)] = np.inf
    return c * (separation / dist.min())


def generate_synthetic(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Features ``(N, d)`` and 1-based labels; class sizes differ by at most one."""
    rng = np.random.default_rng(spec.seed)
    centers = _centers(spec.l, spec.feature_dim, spec.separation, rng)
    sizes = np.full(spec.l, spec.n // spec.l)
    sizes[: spec.n % spec.l] += 1
    labels = np.repeat(np.arange(1, spec.l + 1), sizes)
    x = centers[labels - 1] + rng.normal(size=(spec.n, spec.feature_dim))
    order = rng.permutation(spec.n)
    return x[order], labels[order]


@dataclass(frozen=True)
class Split:
    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray


def split_indices(n: int, seed: int, fractions=(0.6, 0.2, 0.2)) -> Split:
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValidationError("split fractions must sum to 1")
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    split = Split(order[:n_train], order[n_train : n_train + n_val], order[n_train + n_val :])
    if split.test.size == 0 or split.train.size == 0:
        raise ValidationError(f"degenerate split of {n} objects")
    return split


CLASSIFIERS = ("nearest_centroid", "knn5", "stump")
CLUSTERERS = ("kmeans", "single_linkage")


@dataclass(frozen=True)
class BaseRun:
    ensemble: EnsembleInput
    split: Split


def run_base_methods(
    x: np.ndarray,
    y: np.ndarray,
    num_classes: Optional[int] = None,
    seed: int = 0,
    fractions=(0.6, 0.2, 0.2),
) -> BaseRun:
    """Train the three classifiers on the training part, cluster everything.

    The returned ensemble covers the test objects only, with their true
    labels attached for evaluation.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y).astype(np.int64)
    l = int(num_classes or y.max())
    split = split_indices(len(x), seed, fractions)
    xt, yt, xs = x[split.train], y[split.train], x[split.test]
    clf = np.stack(
        [
            learners.nearest_centroid(xt, yt, xs),
            learners.knn(xt, yt, xs, k=5),
            learners.threshold_stump(xt, yt, xs),
        ]
    )
    clu = np.stack(
        [
            learners.kmeans_auto(x, l, seed=seed)[split.test],
            learners.single_linkage(x, l)[split.test],
        ]
    )
    ens = EnsembleInput(
        num_classes=l,
        classifier_outputs=clf,
        clustering_outputs=clu,
        true_labels=y[split.test],
        object_ids=tuple(str(i) for i in split.test),
    )
    return BaseRun(ens, split)


def synthetic_ensemble(
    n: int,
    l: int,
    num_classifiers: int,
    num_clusterers: int,
    accuracy: float = 0.8,
    seed: int = 0,
) -> EnsembleInput:
    """Ensemble of noisy label copies, bypassing any features.

    Each classifier keeps the true label with probability ``accuracy`` and
    otherwise draws uniformly; each clusterer does the same under a random
    relabelling of the clusters.  Used where only sizes matter (timing).
    """
    rng = np.random.default_rng(seed)
    truth = rng.integers(1, l + 1, size=n)

    def noisy() -> np.ndarray:
        keep = rng.random(n) < accuracy
        return np.where(keep, truth, rng.integers(1, l + 1, size=n))

    clf = np.stack([noisy() for _ in range(num_classifiers)])
    clu = (
        np.stack([rng.permutation(l)[noisy() - 1] + 1 for _ in range(num_clusterers)])
        if num_clusterers
        else np.zeros((0, n), dtype=np.int64)
    )
    return EnsembleInput(l, clf, clu, true_labels=truth)
