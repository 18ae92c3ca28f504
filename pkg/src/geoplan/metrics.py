"""Planning metrics: success rate, positional accuracy, action-set overlap."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass


@dataclass(frozen=True)
class EvalBatch:
    """Paired predicted/ground-truth action sequences of equal horizon."""

    predicted: tuple
    truth: tuple

    def __init__(self, predicted, truth):
        predicted = tuple(tuple(p) for p in predicted)
        truth = tuple(tuple(t) for t in truth)
        if len(predicted) != len(truth):
            raise ValueError(
                f"batch size mismatch: {len(predicted)} vs {len(truth)}")
        if not predicted:
            raise ValueError("empty batch")
        for p, t in zip(predicted, truth):
            if len(p) != len(t):
                raise ValueError(
                    f"horizon mismatch: {len(p)} vs {len(t)}")
        object.__setattr__(self, "predicted", predicted)
        object.__setattr__(self, "truth", truth)


def success_rate(batch: EvalBatch) -> float:
    """Fraction of pairs matching the ground truth exactly, element-wise."""
    hits = sum(1 for p, t in zip(batch.predicted, batch.truth) if p == t)
    return hits / len(batch.predicted)


def mean_accuracy(batch: EvalBatch) -> float:
    """Mean over pairs of the fraction of positions predicted correctly."""
    accs = []
    for p, t in zip(batch.predicted, batch.truth):
        accs.append(sum(a == b for a, b in zip(p, t)) / len(p))
    return sum(accs) / len(accs)


def mean_iou(batch: EvalBatch, multiset: bool = False) -> float:
    """Mean overlap of predicted vs. true action ids, order-insensitive.

    Default compares plain sets; `multiset=True` counts repeated ids.
    """
    ious = []
    for p, t in zip(batch.predicted, batch.truth):
        if multiset:
            cp, ct = Counter(p), Counter(t)
            inter = sum((cp & ct).values())
            union = sum((cp | ct).values())
        else:
            sp, st = set(p), set(t)
            inter = len(sp & st)
            union = len(sp | st)
        ious.append(inter / union if union else 1.0)
    return sum(ious) / len(ious)
