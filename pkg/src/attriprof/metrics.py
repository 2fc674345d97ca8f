"""Accuracy evaluation: confusion matrix, OA, AA, kappa.

Rows of the confusion matrix are truth, columns predictions. OA is
trace/total; AA is the mean per-class recall over classes present in the
truth; kappa is (p_o - p_e) / (1 - p_e) with p_o = OA and
p_e = sum_i row_i * col_i / total^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .raster import LabelMap


@dataclass(frozen=True)
class Metrics:
    confusion: np.ndarray  # (C, C) int64, rows = truth
    oa: float
    aa: float
    kappa: float
    per_class_recall: np.ndarray


def metrics_from_confusion(confusion: np.ndarray) -> Metrics:
    conf = np.asarray(confusion, dtype=np.int64)
    if conf.ndim != 2 or conf.shape[0] != conf.shape[1]:
        raise ValidationError(f"confusion matrix must be square, got {conf.shape}")
    total = conf.sum()
    if total <= 0:
        raise ValidationError("confusion matrix is empty")
    total = float(total)
    oa = float(np.trace(conf)) / total
    row = conf.sum(axis=1).astype(np.float64)
    col = conf.sum(axis=0).astype(np.float64)
    present = row > 0
    recall = np.full(conf.shape[0], np.nan)
    recall[present] = np.diag(conf)[present] / row[present]
    aa = float(np.mean(recall[present]))
    pe = float((row * col).sum()) / (total * total)
    kappa = 1.0 if pe >= 1.0 else (oa - pe) / (1.0 - pe)
    return Metrics(
        confusion=conf, oa=oa, aa=aa, kappa=float(kappa), per_class_recall=recall
    )


def evaluate(predicted, truth: LabelMap) -> Metrics:
    """Compare a predicted class map against truth, over truth != 0 only."""
    pred = predicted.labels if isinstance(predicted, LabelMap) else np.asarray(predicted)
    if pred.shape != truth.labels.shape:
        raise ValidationError(
            f"predicted map {pred.shape} does not match truth {truth.labels.shape}"
        )
    c = truth.class_count
    if c == 0:
        raise ValidationError("no labeled pixels to evaluate")
    mask = truth.labels > 0
    t = truth.labels[mask].astype(np.int64)
    p = pred[mask].astype(np.int64)
    if p.min() < 0 or p.max() > c:
        raise ValidationError(
            f"predicted ids span {p.min()}..{p.max()}, truth has classes 1..{c}"
        )
    if (p == 0).any():
        raise ValidationError("predicted map contains unlabeled pixels on evaluated area")
    conf = np.zeros((c, c), dtype=np.int64)
    np.add.at(conf, (t - 1, p - 1), 1)
    return metrics_from_confusion(conf)


def metrics_to_csv(m: Metrics) -> str:
    lines = ["metric,value"]
    lines.append(f"oa,{m.oa!r}")
    lines.append(f"aa,{m.aa!r}")
    lines.append(f"kappa,{m.kappa!r}")
    for i, r in enumerate(m.per_class_recall, start=1):
        lines.append(f"recall_class_{i},{'' if np.isnan(r) else repr(float(r))}")
    c = m.confusion.shape[0]
    for i in range(c):
        lines.append(
            f"confusion_row_{i + 1}," + " ".join(str(int(v)) for v in m.confusion[i])
        )
    return "\n".join(lines) + "\n"


def format_metrics(m: Metrics) -> str:
    c = m.confusion.shape[0]
    width = max(6, len(str(int(m.confusion.max(initial=1)))) + 1)
    out = [
        f"OA     {m.oa:.4f}",
        f"AA     {m.aa:.4f}",
        f"kappa  {m.kappa:.4f}",
        "confusion (rows = truth):",
        "      " + "".join(f"{f'p{j + 1}':>{width}}" for j in range(c)),
    ]
    for i in range(c):
        row = "".join(f"{int(v):>{width}}" for v in m.confusion[i])
        rec = m.per_class_recall[i]
        rec_s = "   -" if np.isnan(rec) else f"{rec:.4f}"
        out.append(f"t{i + 1:<4} {row}  recall {rec_s}")
    return "\n".join(out) + "\n"
