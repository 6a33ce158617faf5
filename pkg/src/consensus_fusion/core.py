"""Data model for base-method outputs and the matrices built from them.

Every base classifier contributes one *base group* per class it actually
predicts, every base clusterer one group per cluster.  From the groups we
derive the object-group membership matrix, the object co-occurrence counts
and the classifier vote fractions that feed the fusion objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence

import numpy as np

from .errors import ValidationError

GroupKind = Literal["classifier", "clusterer"]


def _as_label_matrix(rows: Sequence[Sequence[int]] | np.ndarray, name: str) -> np.ndarray:
    arr = np.asarray(rows)
    if arr.size == 0:
        return np.zeros((0, 0), dtype=np.int64)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a list of equal-length vectors")
    if not np.issubdtype(arr.dtype, np.integer):
        as_int = arr.astype(np.int64)
        if not np.array_equal(as_int, arr):
            raise ValidationError(f"{name} must contain integer ids")
        arr = as_int
    return arr.astype(np.int64)


def _relabel_contiguous(ids: np.ndarray) -> np.ndarray:
    # ascending order of the raw ids is preserved
    _, inverse = np.unique(ids, return_inverse=True)
    return inverse.astype(np.int64) + 1


@dataclass(frozen=True)
class EnsembleInput:
    """Hard outputs of ``C1`` base classifiers and ``C2`` base clusterers.

    ``classifier_outputs`` is a ``(C1, N)`` array of class labels in
    ``1..num_classes``; ``clustering_outputs`` is ``(C2, N)`` with arbitrary
    integer cluster ids, relabelled here to ``1..k`` per method.
    ``true_labels`` is carried for evaluation only and never used in fusion.
    """

    num_classes: int
    classifier_outputs: np.ndarray
    clustering_outputs: np.ndarray = field(default_factory=lambda: np.zeros((0, 0), dtype=np.int64))
    true_labels: Optional[np.ndarray] = None
    object_ids: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        l = int(self.num_classes)
        if l < 2:
            raise ValidationError(f"num_classes must be >= 2, got {self.num_classes}")
        clf = _as_label_matrix(self.classifier_outputs, "classifier_outputs")
        if clf.shape[0] == 0:
            raise ValidationError("at least one base classifier is required")
        n = clf.shape[1]
        if n == 0:
            raise ValidationError("num_objects must be positive")
        bad = (clf < 1) | (clf > l)
        if bad.any():
            m, i = np.argwhere(bad)[0]
            raise ValidationError(
                f"classifier {m} assigns label {clf[m, i]} to object {i}; labels must lie in 1..{l}"
            )
        clu = _as_label_matrix(self.clustering_outputs, "clustering_outputs")
        if clu.shape[0] == 0:
            clu = np.zeros((0, n), dtype=np.int64)
        elif clu.shape[1] != n:
            raise ValidationError(
                f"clustering outputs have length {clu.shape[1]}, expected {n}"
            )
        clu = np.stack([_relabel_contiguous(row) for row in clu]) if len(clu) else clu
        truth = None
        if self.true_labels is not None:
            truth = np.asarray(self.true_labels).astype(np.int64).ravel()
            if truth.shape[0] != n:
                raise ValidationError(f"true_labels has length {truth.shape[0]}, expected {n}")
            if ((truth < 1) | (truth > l)).any():
                raise ValidationError(f"true labels must lie in 1..{l}")
            truth.setflags(write=False)
        ids = self.object_ids
        if ids is not None:
            ids = tuple(str(x) for x in ids)
            if len(ids) != n:
                raise ValidationError(f"object_ids has length {len(ids)}, expected {n}")
        clf = clf.copy()
        clf.setflags(write=False)
        clu.setflags(write=False)
        object.__setattr__(self, "num_classes", l)
        object.__setattr__(self, "classifier_outputs", clf)
        object.__setattr__(self, "clustering_outputs", clu)
        object.__setattr__(self, "true_labels", truth)
        object.__setattr__(self, "object_ids", ids)

    @property
    def num_objects(self) -> int:
        return self.classifier_outputs.shape[1]

    @property
    def num_classifiers(self) -> int:
        return self.classifier_outputs.shape[0]

    @property
    def num_clusterers(self) -> int:
        return self.clustering_outputs.shape[0]

    @property
    def num_methods(self) -> int:
        return self.num_classifiers + self.num_clusterers

    def ids(self) -> tuple[str, ...]:
        if self.object_ids is not None:
            return self.object_ids
        return tuple(str(i + 1) for i in range(self.num_objects))

    def with_outputs(
        self,
        classifier_outputs: np.ndarray | None = None,
        clustering_outputs: np.ndarray | None = None,
    ) -> "EnsembleInput":
        """Return a copy with replaced classifier and/or clusterer outputs."""
        return EnsembleInput(
            num_classes=self.num_classes,
            classifier_outputs=self.classifier_outputs if classifier_outputs is None else classifier_outputs,
            clustering_outputs=self.clustering_outputs if clustering_outputs is None else clustering_outputs,
            true_labels=self.true_labels,
            object_ids=self.object_ids,
        )

    def subset(self, index: Sequence[int] | np.ndarray) -> "EnsembleInput":
        """Restrict every output vector to the given objects."""
        idx = np.asarray(index, dtype=np.int64)
        return EnsembleInput(
            num_classes=self.num_classes,
            classifier_outputs=self.classifier_outputs[:, idx],
            clustering_outputs=self.clustering_outputs[:, idx],
            true_labels=None if self.true_labels is None else self.true_labels[idx],
            object_ids=None if self.object_ids is None else tuple(self.object_ids[i] for i in idx),
        )


@dataclass(frozen=True)
class Group:
    source: int
    kind: GroupKind
    local_id: int
    members: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class GroupCatalog:
    groups: tuple[Group, ...]

    @property
    def G(self) -> int:
        return len(self.groups)

    @property
    def G1(self) -> int:
        return sum(g.kind == "classifier" for g in self.groups)

    @property
    def G2(self) -> int:
        return sum(g.kind == "clusterer" for g in self.groups)

    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups], dtype=np.int64)


def build_group_catalog(inp: EnsembleInput) -> GroupCatalog:
    """Enumerate base groups: classifier classes first, then clusters.

    Within each kind groups follow method order, then label (or cluster id)
    order.  Classes a classifier never predicts yield no group.
    """
    groups: list[Group] = []
    for m, labels in enumerate(inp.classifier_outputs):
        for c in range(1, inp.num_classes + 1):
            members = np.flatnonzero(labels == c)
            if members.size:
                groups.append(Group(m, "classifier", c, tuple(int(i) for i in members)))
    for m, ids in enumerate(inp.clustering_outputs):
        for c in np.unique(ids):
            members = np.flatnonzero(ids == c)
            groups.append(Group(m, "clusterer", int(c), tuple(int(i) for i in members)))
    return GroupCatalog(tuple(groups))


def build_membership(inp: EnsembleInput, catalog: GroupCatalog) -> np.ndarray:
    """Binary ``N x G`` object-group incidence matrix."""
    a = np.zeros((inp.num_objects, catalog.G))
    for j, g in enumerate(catalog.groups):
        a[list(g.members), j] = 1.0
    a.setflags(write=False)
    return a


def build_cooccurrence(membership: np.ndarray) -> np.ndarray:
    """Number of base groups shared by each pair of objects.

    The diagonal holds the number of base methods, since an object shares
    every one of its own groups with itself.
    """
    a = np.asarray(membership, dtype=float)
    c = a @ a.T
    c.setflags(write=False)
    return c


def vote_counts(inp: EnsembleInput) -> np.ndarray:
    """``N x l`` matrix of how many classifiers voted each class per object."""
    n, l = inp.num_objects, inp.num_classes
    counts = np.zeros((n, l))
    for labels in inp.classifier_outputs:
        counts[np.arange(n), labels - 1] += 1.0
    return counts


@dataclass(frozen=True)
class VoteMatrices:
    objects: np.ndarray
    groups: np.ndarray


def build_votes(inp: EnsembleInput, catalog: GroupCatalog) -> VoteMatrices:
    """Average classifier votes per object and per base group.

    A group's row pools the ``C1`` votes of each of its members, so it is the
    mean of the member object rows.  The classifier that defines a group is
    counted like any other.
    """
    y_obj = vote_counts(inp) / inp.num_classifiers
    y_grp = np.empty((catalog.G, inp.num_classes))
    for j, g in enumerate(catalog.groups):
        y_grp[j] = y_obj[list(g.members)].mean(axis=0)
    y_obj.setflags(write=False)
    y_grp.setflags(write=False)
    return VoteMatrices(y_obj, y_grp)
