"""Perturbations applied to ensembles, datasets and objective weights."""

from __future__ import annotations

import numpy as np

from ..core import EnsembleInput
from ..errors import ValidationError
from ..objective import ObjectiveParams

ALPHA_FLOOR = 1e-6


def inject_random_classifier(inp: EnsembleInput, count: int, seed: int) -> EnsembleInput:
    """Append ``count`` classifiers labelling every object uniformly at random."""
    if count < 0:
        raise ValidationError("count must be >= 0")
    if count == 0:
        return inp
    rng = np.random.default_rng(seed)
    extra = rng.integers(1, inp.num_classes + 1, size=(count, inp.num_objects))
    return inp.with_outputs(classifier_outputs=np.vstack([inp.classifier_outputs, extra]))


def random_partition(n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform cluster count in ``[1, n]``, uniform assignment, empties repaired.

    Each empty cluster takes one object from the currently largest cluster.
    """
    c = int(rng.integers(1, n + 1))
    ids = rng.integers(0, c, size=n)
    counts = np.bincount(ids, minlength=c)
    for empty in np.flatnonzero(counts == 0):
        donor = int(np.argmax(counts))
        victim = int(rng.choice(np.flatnonzero(ids == donor)))
        ids[victim] = empty
        counts[donor] -= 1
        counts[empty] += 1
    return ids + 1


def inject_random_clusterer(inp: EnsembleInput, count: int, seed: int) -> EnsembleInput:
    """Append ``count`` random partitions with no empty cluster."""
    if count < 0:
        raise ValidationError("count must be >= 0")
    if count == 0:
        return inp
    rng = np.random.default_rng(seed)
    extra = np.stack([random_partition(inp.num_objects, rng) for _ in range(count)])
    base = inp.clustering_outputs
    clu = extra if base.shape[0] == 0 else np.vstack([base, extra])
    return inp.with_outputs(clustering_outputs=clu)


def inject_imbalance(
    x: np.ndarray, y: np.ndarray, percent: float, seed: int
) -> tuple[np.ndarray, np.ndarray, int]:
    """Drop ``floor(percent% * size)`` objects of one uniformly chosen class.

    Returns the reduced features, labels and the manipulated class.
    """
    if not 0 <= percent <= 100:
        raise ValidationError("percent must lie in [0, 100]")
    y = np.asarray(y)
    rng = np.random.default_rng(seed)
    classes = np.unique(y)
    target = int(rng.choice(classes))
    members = np.flatnonzero(y == target)
    k = int(np.floor(percent / 100.0 * members.size + 1e-9))
    if k >= members.size:
        raise ValidationError(f"removing {k} objects would empty class {target}")
    drop = rng.choice(members, size=k, replace=False)
    keep = np.setdiff1d(np.arange(y.size), drop)
    return np.asarray(x)[keep], y[keep], target


def ablate_component(params: ObjectiveParams, component: int) -> ObjectiveParams:
    """Remove one objective term and rescale the other weights to sum to one.

    ``alpha`` cannot be zero, so dropping term 1 pins it to ``1e-6`` instead.
    """
    if component not in (1, 2, 3, 4):
        raise ValidationError("component must be 1, 2, 3 or 4")
    w = np.array(params.as_tuple())
    fixed = ALPHA_FLOOR if component == 1 else 0.0
    w[component - 1] = 0.0
    rest = w.sum()
    if rest <= 0:
        raise ValidationError("cannot drop the only nonzero component")
    w *= (1.0 - fixed) / rest
    w[component - 1] = fixed
    return ObjectiveParams(*w.tolist())
