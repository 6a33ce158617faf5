"""Classification and clustering quality metrics."""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass
from typing import Literal, Optional

import numpy as np
from scipy.stats import rankdata

from .errors import ValidationError


@dataclass(frozen=True)
class MetricReport:
    auc: Optional[float]
    f_score: float
    per_class_f: tuple[float, ...]
    support: tuple[int, ...]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["per_class_f"] = list(self.per_class_f)
        d["support"] = list(self.support)
        return d


def binary_auc(scores: np.ndarray, positive: np.ndarray) -> float:
    """Mann-Whitney AUC; tied positive/negative pairs count one half."""
    scores = np.asarray(scores, dtype=float)
    positive = np.asarray(positive, dtype=bool)
    n_pos = int(positive.sum())
    n_neg = positive.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("AUC needs at least one positive and one negative example")
    ranks = rankdata(scores)
    u = ranks[positive].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def auc(scores: np.ndarray, truth: np.ndarray, hard: bool = False) -> float:
    """AUC of an ``N x l`` score matrix against 1-based labels.

    Binary problems score class 2.  With more classes the result is the
    unweighted mean of one-vs-rest AUCs; classes absent from ``truth`` are
    skipped with a warning.  ``hard=True`` replaces scores by the one-hot
    argmax prediction first.
    """
    scores = np.asarray(scores, dtype=float)
    truth = np.asarray(truth).astype(np.int64).ravel()
    if scores.ndim != 2 or scores.shape[0] != truth.size:
        raise ValidationError("scores must be N x l with one row per label")
    l = scores.shape[1]
    if ((truth < 1) | (truth > l)).any():
        raise ValidationError(f"labels must lie in 1..{l}")
    if np.unique(truth).size < 2:
        raise ValidationError("truth contains a single class; AUC is undefined")
    if hard:
        onehot = np.zeros_like(scores)
        onehot[np.arange(len(scores)), np.argmax(scores, axis=1)] = 1.0
        scores = onehot
    if l == 2:
        return binary_auc(scores[:, 1], truth == 2)
    values = []
    for c in range(1, l + 1):
        pos = truth == c
        if not pos.any():
            warnings.warn(f"class {c} absent from truth; excluded from macro AUC", stacklevel=2)
            continue
        values.append(binary_auc(scores[:, c - 1], pos))
    return float(np.mean(values))


def f_score(pred: np.ndarray, truth: np.ndarray, num_classes: int) -> MetricReport:
    """Per-class F1 and the headline F-score.

    The headline is the class-2 F1 for binary problems and the macro
    average otherwise.
    """
    pred = np.asarray(pred).astype(np.int64).ravel()
    truth = np.asarray(truth).astype(np.int64).ravel()
    if pred.shape != truth.shape:
        raise ValidationError("pred and truth differ in length")
    per_class = []
    support = []
    for c in range(1, num_classes + 1):
        tp = np.sum((pred == c) & (truth == c))
        fp = np.sum((pred == c) & (truth != c))
        fn = np.sum((pred != c) & (truth == c))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        per_class.append(
            2 * precision * recall / (precision + recall) if precision + recall else 0.0
        )
        support.append(int(np.sum(truth == c)))
    headline = per_class[1] if num_classes == 2 else float(np.mean(per_class))
    return MetricReport(None, float(headline), tuple(float(x) for x in per_class), tuple(support))


def evaluate(scores: np.ndarray, truth: np.ndarray, hard_auc: bool = False) -> MetricReport:
    """AUC plus F-scores of the argmax labels of ``scores``."""
    scores = np.asarray(scores, dtype=float)
    pred = np.argmax(scores, axis=1) + 1
    rep = f_score(pred, truth, scores.shape[1])
    return MetricReport(auc(scores, truth, hard=hard_auc), rep.f_score, rep.per_class_f, rep.support)


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0] / counts.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(
    clusters: np.ndarray,
    truth: np.ndarray,
    average: Literal["geometric", "arithmetic"] = "geometric",
) -> float:
    """Normalised mutual information with natural-log entropies."""
    a = np.asarray(clusters).ravel()
    b = np.asarray(truth).ravel()
    if a.shape != b.shape:
        raise ValidationError("partitions differ in length")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1))
    np.add.at(table, (ai, bi), 1.0)
    h_a = _entropy(table.sum(axis=1))
    h_b = _entropy(table.sum(axis=0))
    if h_a == 0.0 and h_b == 0.0:
        return 1.0
    if h_a == 0.0 or h_b == 0.0:
        return 0.0
    n = table.sum()
    nz = table > 0
    outer = np.outer(table.sum(axis=1), table.sum(axis=0))
    mi = float(np.sum(table[nz] / n * np.log(table[nz] * n / outer[nz])))
    if average == "geometric":
        norm = np.sqrt(h_a * h_b)
    elif average == "arithmetic":
        norm = (h_a + h_b) / 2.0
    else:
        raise ValidationError(f"unknown average {average!r}")
    return float(min(max(mi / norm, 0.0), 1.0))
