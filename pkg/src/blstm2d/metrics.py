"""Accuracy and macro-averaged F1."""
from __future__ import annotations

import numpy as np


def accuracy(gold, pred) -> float:
    gold = np.asarray(gold)
    pred = np.asarray(pred)
    if gold.size == 0:
        raise ValueError("no predictions to score")
    return float(np.mean(gold == pred))


def per_class_f1(gold, pred, classes=None) -> dict:
    gold = np.asarray(gold)
    pred = np.asarray(pred)
    if classes is None:
        classes = sorted(set(gold.tolist()) | set(pred.tolist()))
    out = {}
    for c in classes:
        tp = int(np.sum((pred == c) & (gold == c)))
        fp = int(np.sum((pred == c) & (gold != c)))
        fn = int(np.sum((pred != c) & (gold == c)))
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        out[c] = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return out


def macro_f1(gold, pred, classes=None) -> float:
    """Unweighted mean of per-class F1 over classes seen in gold or predictions."""
    if len(gold) == 0:
        raise ValueError("no predictions to score")
    scores = per_class_f1(gold, pred, classes)
    return float(sum(scores.values()) / len(scores))


METRICS = {"accuracy": accuracy, "macro-f1": macro_f1}


def score(metric: str, gold, pred) -> float:
    try:
        return METRICS[metric](gold, pred)
    except KeyError:
        raise ValueError(f"unknown metric {metric!r}") from None
