"""Binary classification metrics and stratified fold plans."""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from ..errors import KTooLarge, NoPositives, ValidationError


@dataclass(frozen=True)
class Confusion:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    @classmethod
    def from_predictions(cls, y_true, y_pred):
        y_true = np.asarray(y_true, dtype=bool)
        y_pred = np.asarray(y_pred, dtype=bool)
        return cls(
            int((y_true & y_pred).sum()), int((~y_true & y_pred).sum()),
            int((~y_true & ~y_pred).sum()), int((y_true & ~y_pred).sum()),
        )


def _counts(c):
    if not isinstance(c, Confusion):
        c = Confusion(*c)
    if min(c.tp, c.fp, c.tn, c.fn) < 0 or c.total == 0:
        raise ValidationError("confusion counts must be non-negative with a positive total")
    return c


def f1(c) -> float:
    c = _counts(c)
    den = 2 * c.tp + c.fp + c.fn
    return 2 * c.tp / den if den else 0.0


def balanced_accuracy(c) -> float:
    """Mean of the per-class recalls; a class absent from the truth is skipped."""
    c = _counts(c)
    rates = []
    if c.tp + c.fn:
        rates.append(c.tp / (c.tp + c.fn))
    if c.tn + c.fp:
        rates.append(c.tn / (c.tn + c.fp))
    return float(np.mean(rates))


def mcc(c) -> float:
    c = _counts(c)
    den = (c.tp + c.fp) * (c.tp + c.fn) * (c.tn + c.fp) * (c.tn + c.fn)
    if den == 0:
        return 0.0
    return (c.tp * c.tn - c.fp * c.fn) / math.sqrt(den)


def mcc_normalized(c) -> float:
    return (mcc(c) + 1.0) / 2.0


def pr_auc(scores, labels) -> float:
    """Step-wise average precision with tied scores grouped into one step."""
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels, dtype=bool)
    if len(scores) != len(labels):
        raise ValidationError("scores and labels differ in length")
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise NoPositives("pr_auc needs at least one positive label")
    order = np.argsort(-scores, kind="mergesort")
    s, y = scores[order], labels[order]
    tp = np.cumsum(y)
    fp = np.cumsum(~y)
    # last index of each tie group
    ends = np.r_[np.flatnonzero(np.diff(s) != 0), len(s) - 1]
    tp, fp = tp[ends], fp[ends]
    precision = tp / (tp + fp)
    recall = tp / n_pos
    d_recall = np.diff(np.r_[0.0, recall])
    return float(np.clip((precision * d_recall).sum(), 0.0, 1.0))


@dataclass(frozen=True)
class BinaryMetrics:
    f1: float
    balanced_accuracy: float
    pr_auc: float
    mcc_normalized: float
    tp: int
    fp: int
    tn: int
    fn: int

    def to_dict(self):
        return asdict(self)


def binary_metrics(y_true, scores, threshold=0.5) -> BinaryMetrics:
    """All metrics for probability ``scores``; hard predictions use ``score >= threshold``."""
    y_true = np.asarray(y_true, dtype=bool)
    scores = np.asarray(scores, dtype=float)
    c = Confusion.from_predictions(y_true, scores >= threshold)
    return BinaryMetrics(
        f1(c), balanced_accuracy(c), pr_auc(scores, y_true), mcc_normalized(c),
        c.tp, c.fp, c.tn, c.fn,
    )


def stratified_kfold(y, k: int, seed=0) -> list:
    """Shuffle each class and deal rows round-robin into ``k`` folds.

    The negative class continues dealing where the positives stopped, so
    fold sizes also differ by at most one.
    """
    y = np.asarray(y, dtype=bool)
    n = len(y)
    if k < 2:
        raise ValidationError("k must be >= 2")
    if k > n:
        raise KTooLarge(f"k={k} exceeds {n} rows")
    n_pos = int(y.sum())
    if n_pos < k:
        warnings.warn(f"only {n_pos} positives for {k} folds; some folds lack positives", stacklevel=2)
    rng = np.random.default_rng(seed)
    folds = [[] for _ in range(k)]
    start = 0
    for cls in (True, False):
        idx = rng.permutation(np.flatnonzero(y == cls))
        for i, row in enumerate(idx):
            folds[(start + i) % k].append(int(row))
        start = (start + len(idx)) % k
    return [np.sort(np.array(f, dtype=int)) for f in folds]
