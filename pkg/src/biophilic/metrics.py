"""Multi-label confusion counting, per-class P/R/F1, and the four averages.

Zero-denominator convention: precision, recall, and F1 are defined as 0
whenever their denominator is 0. The one exception is the samples average,
where a row with no actual and no predicted labels scores P = R = F1 = 1
(vacuously correct) so all-negative rows are not penalized.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import LabelTaxonomy
from .errors import ShapeError, ValidationError


@dataclass
class ClassCounts:
    """Per-class TP/FP/FN/TN tallies over an N x L prediction matrix."""

    tp: np.ndarray
    fp: np.ndarray
    fn: np.ndarray
    tn: np.ndarray

    @property
    def support(self) -> np.ndarray:
        return self.tp + self.fn

    @property
    def n_classes(self) -> int:
        return self.tp.shape[0]


def _as_binary_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got {arr.ndim}-D")
    if not np.isin(arr, (0, 1)).all():
        raise ValidationError(f"{name} must contain only 0/1 entries")
    return arr.astype(np.int64)


def count_confusions(pred, actual) -> ClassCounts:
    """Column-wise confusion counts for binary matrices of equal shape."""
    p = _as_binary_matrix(pred, "pred")
    a = _as_binary_matrix(actual, "actual")
    if p.shape != a.shape:
        raise ShapeError(f"shape mismatch: pred {p.shape} vs actual {a.shape}")
    tp = ((p == 1) & (a == 1)).sum(axis=0)
    fp = ((p == 1) & (a == 0)).sum(axis=0)
    fn = ((p == 0) & (a == 1)).sum(axis=0)
    tn = ((p == 0) & (a == 0)).sum(axis=0)
    return ClassCounts(tp=tp, fp=fp, fn=fn, tn=tn)


def _safe_div(num, den):
    num = np.asarray(num, dtype=np.float64)
    den = np.asarray(den, dtype=np.float64)
    out = np.zeros_like(num)
    np.divide(num, den, out=out, where=den > 0)
    return out


def precision(counts: ClassCounts) -> np.ndarray:
    """Per-class TP / (TP + FP); 0 where nothing was predicted positive."""
    return _safe_div(counts.tp, counts.tp + counts.fp)


def recall(counts: ClassCounts) -> np.ndarray:
    """Per-class TP / (TP + FN); 0 where the class never occurs."""
    return _safe_div(counts.tp, counts.tp + counts.fn)


def f1(counts: ClassCounts) -> np.ndarray:
    """Per-class harmonic mean of precision and recall."""
    p = precision(counts)
    r = recall(counts)
    return _safe_div(2.0 * p * r, p + r)


def f1_from_precision_recall(p: float, r: float) -> float:
    """Scalar F1 = 2PR / (P + R), 0 when both are 0."""
    if p + r == 0:
        return 0.0
    return 2.0 * p * r / (p + r)


@dataclass
class Aggregate:
    precision: float
    recall: float
    f1: float

    def to_dict(self, ndigits: int | None = None) -> dict:
        d = {"precision": self.precision, "recall": self.recall, "f1": self.f1}
        if ndigits is not None:
            d = {k: round(v, ndigits) for k, v in d.items()}
        return d


@dataclass
class PerClass:
    label: str
    precision: float
    recall: float
    f1: float
    support: int

    def to_dict(self, ndigits: int | None = None) -> dict:
        p, r, f = self.precision, self.recall, self.f1
        if ndigits is not None:
            p, r, f = round(p, ndigits), round(r, ndigits), round(f, ndigits)
        return {
            "label": self.label,
            "precision": p,
            "recall": r,
            "f1": f,
            "support": self.support,
        }


@dataclass
class MetricsReport:
    """Per-class metrics plus micro/macro/weighted/samples aggregates."""

    per_class: list[PerClass]
    micro: Aggregate
    macro: Aggregate
    weighted: Aggregate
    samples: Aggregate

    def to_dict(self, ndigits: int | None = 4) -> dict:
        return {
            "per_class": [c.to_dict(ndigits) for c in self.per_class],
            "micro": self.micro.to_dict(ndigits),
            "macro": self.macro.to_dict(ndigits),
            "weighted": self.weighted.to_dict(ndigits),
            "samples": self.samples.to_dict(ndigits),
        }

    def to_json(self, ndigits: int | None = 4) -> str:
        return json.dumps(self.to_dict(ndigits), indent=2)


def _samples_average(p: np.ndarray, a: np.ndarray) -> Aggregate:
    n = p.shape[0]
    ps, rs, fs = np.empty(n), np.empty(n), np.empty(n)
    inter = ((p == 1) & (a == 1)).sum(axis=1)
    n_pred = p.sum(axis=1)
    n_act = a.sum(axis=1)
    for i in range(n):
        if n_pred[i] == 0 and n_act[i] == 0:
            ps[i] = rs[i] = fs[i] = 1.0  # vacuously correct row
            continue
        ps[i] = inter[i] / n_pred[i] if n_pred[i] > 0 else 0.0
        rs[i] = inter[i] / n_act[i] if n_act[i] > 0 else 0.0
        fs[i] = f1_from_precision_recall(ps[i], rs[i])
    return Aggregate(float(ps.mean()), float(rs.mean()), float(fs.mean()))


def classification_report(pred, actual, taxonomy: LabelTaxonomy) -> MetricsReport:
    """Full evaluation of binary predictions against binary ground truth."""
    p = _as_binary_matrix(pred, "pred")
    a = _as_binary_matrix(actual, "actual")
    if p.shape != a.shape:
        raise ShapeError(f"shape mismatch: pred {p.shape} vs actual {a.shape}")
    if p.shape[0] == 0:
        raise ValidationError("cannot evaluate zero rows")
    if p.shape[1] != len(taxonomy):
        raise ShapeError(
            f"matrix has {p.shape[1]} columns, taxonomy has {len(taxonomy)} labels"
        )

    counts = count_confusions(p, a)
    cls_p, cls_r, cls_f = precision(counts), recall(counts), f1(counts)
    support = counts.support

    per_class = [
        PerClass(
            label=taxonomy.labels[c],
            precision=float(cls_p[c]),
            recall=float(cls_r[c]),
            f1=float(cls_f[c]),
            support=int(support[c]),
        )
        for c in range(len(taxonomy))
    ]

    tp, fp, fn = counts.tp.sum(), counts.fp.sum(), counts.fn.sum()
    micro_p = float(_safe_div(tp, tp + fp))
    micro_r = float(_safe_div(tp, tp + fn))
    micro = Aggregate(micro_p, micro_r, f1_from_precision_recall(micro_p, micro_r))

    macro = Aggregate(float(cls_p.mean()), float(cls_r.mean()), float(cls_f.mean()))

    total = support.sum()
    if total > 0:
        w = support / total
        weighted = Aggregate(
            float((w * cls_p).sum()), float((w * cls_r).sum()), float((w * cls_f).sum())
        )
    else:
        weighted = Aggregate(0.0, 0.0, 0.0)

    return MetricsReport(
        per_class=per_class,
        micro=micro,
        macro=macro,
        weighted=weighted,
        samples=_samples_average(p, a),
    )
