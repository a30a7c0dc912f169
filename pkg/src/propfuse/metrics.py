"""Per-class effectiveness metrics computed from one-vs-rest confusion counts.

Every metric here is a ratio of forms that are homogeneous in the total
count, so counts may be given either as raw integers or as proportions of
the evaluation set; the result is identical (scale invariance).

Zero-denominator convention: any ratio whose denominator is zero evaluates
to 0 rather than NaN, so a degenerate flow receives zero fusion weight.
The single exception is an all-zero confusion record, which is rejected
with :class:`EmptyConfusionError` because nothing was evaluated at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple

from .errors import DegenerateClassesError, EmptyConfusionError

#: Identifiers of every supported effectiveness metric, in the canonical
#: reporting order of the comparison harness.
METRIC_IDS: Tuple[str, ...] = (
    "epars",
    "prs",
    "pr",
    "ps",
    "precision",
    "cohens_kappa",
    "mcc",
    "f1",
    "sr",
    "specificity",
    "accuracy",
    "auc",
    "balanced_accuracy",
    "recall",
)


@dataclass(frozen=True)
class ConfusionCounts:
    """One-vs-rest confusion counts for a single (flow, class) pair.

    Fields may be raw counts or proportions; all metrics are invariant to
    the scale of the total.
    """

    tp: float
    tn: float
    fp: float
    fn: float

    def __post_init__(self):
        for name in ("tp", "tn", "fp", "fn"):
            value = getattr(self, name)
            if value < 0 or not math.isfinite(value):
                raise ValueError(f"{name} must be finite and >= 0, got {value}")

    @property
    def total(self) -> float:
        return self.tp + self.tn + self.fp + self.fn

    def scaled(self, factor: float) -> "ConfusionCounts":
        return ConfusionCounts(
            self.tp * factor, self.tn * factor, self.fp * factor, self.fn * factor
        )


def _ratio(num: float, den: float) -> float:
    return num / den if den > 0 else 0.0


def accuracy(c: ConfusionCounts) -> float:
    """(TP + TN) / total."""
    return _ratio(c.tp + c.tn, c.total)


def precision(c: ConfusionCounts) -> float:
    """TP / (TP + FP)."""
    return _ratio(c.tp, c.tp + c.fp)


def recall(c: ConfusionCounts) -> float:
    """TP / (TP + FN)."""
    return _ratio(c.tp, c.tp + c.fn)


def specificity(c: ConfusionCounts) -> float:
    """TN / (TN + FP)."""
    return _ratio(c.tn, c.tn + c.fp)


def f1(c: ConfusionCounts) -> float:
    """Harmonic mean of precision and recall."""
    p, r = precision(c), recall(c)
    return _ratio(2.0 * p * r, p + r)


def balanced_accuracy(c: ConfusionCounts) -> float:
    """(recall + specificity) / 2."""
    return 0.5 * (recall(c) + specificity(c))


def cohens_kappa(c: ConfusionCounts) -> float:
    """Agreement between votes and labels beyond the chance level.

    Computed from the binary confusion matrix as (p_o - p_e) / (1 - p_e)
    with the marginal chance agreement p_e; may be negative for a
    worse-than-chance flow.
    """
    # Normalize to proportions first; the quadratic chance term would
    # underflow for denormal-scale counts otherwise.
    total = c.total
    tp, tn, fp, fn = c.tp / total, c.tn / total, c.fp / total, c.fn / total
    p_o = tp + tn
    p_e = (tp + fp) * (tp + fn) + (fn + tn) * (fp + tn)
    return _ratio(p_o - p_e, 1.0 - p_e)


def mcc(c: ConfusionCounts) -> float:
    """Matthews correlation coefficient; in [-1, 1], 0 at chance level."""
    total = c.total
    tp, tn, fp, fn = c.tp / total, c.tn / total, c.fp / total, c.fn / total
    num = tp * tn - fp * fn
    den = math.sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn))
    return num / den if den > 0 else 0.0


def vote_indicator_auc(c: ConfusionCounts) -> float:
    """Ranking quality when the only available score is the 0/1 vote.

    With a binary score the positives at 1 are tp, at 0 fn; negatives at 1
    are fp, at 0 tn. Counting ties as half, the probability that a random
    positive outranks a random negative collapses to balanced accuracy.
    This is the counts-only fallback used for stored effectiveness tables;
    score-based ranking uses :func:`auc`.
    """
    return balanced_accuracy(c)


def epars(c: ConfusionCounts) -> float:
    """Product of precision, accuracy, recall, and specificity."""
    if c.total == 0:
        raise EmptyConfusionError("all four confusion counts are zero")
    return precision(c) * accuracy(c) * recall(c) * specificity(c)


def epars_expansion(c: ConfusionCounts) -> float:
    """Closed form of :func:`epars` in the raw counts.

    (TN*TP^3 + TN^2*TP^2) / ((TN+FP)(TP+FP)(TP+FN)(TP+TN+FP+FN));
    equal to the product form whenever no factor has a zero denominator.
    """
    if c.total == 0:
        raise EmptyConfusionError("all four confusion counts are zero")
    num = c.tn * c.tp**3 + c.tn**2 * c.tp**2
    den = (c.tn + c.fp) * (c.tp + c.fp) * (c.tp + c.fn) * c.total
    return num / den if den > 0 else 0.0


_PRODUCT_FACTORS = {
    "pr": (precision, recall),
    "ps": (precision, specificity),
    "sr": (specificity, recall),
    "prs": (precision, recall, specificity),
}

_SCALAR_METRICS = {
    "accuracy": accuracy,
    "precision": precision,
    "recall": recall,
    "specificity": specificity,
    "f1": f1,
    "balanced_accuracy": balanced_accuracy,
    "cohens_kappa": cohens_kappa,
    "mcc": mcc,
    "auc": vote_indicator_auc,
    "epars": epars,
}


def metric(metric_id: str, c: ConfusionCounts) -> float:
    """Evaluate one effectiveness metric on a confusion record.

    `metric_id` is one of :data:`METRIC_IDS`. Raises
    :class:`EmptyConfusionError` when all counts are zero and ValueError
    for an unknown id. Only `cohens_kappa` and `mcc` may go negative;
    everything else lies in [0, 1].
    """
    if c.total == 0:
        raise EmptyConfusionError("all four confusion counts are zero")
    if metric_id in _SCALAR_METRICS:
        return _SCALAR_METRICS[metric_id](c)
    if metric_id in _PRODUCT_FACTORS:
        value = 1.0
        for factor in _PRODUCT_FACTORS[metric_id]:
            value *= factor(c)
        return value
    raise ValueError(f"unknown metric id: {metric_id!r}")


def auc(scored: Iterable[Tuple[float, bool]]) -> float:
    """Area under the ROC curve from (score, is_positive) pairs.

    Computed as the Mann-Whitney statistic: the probability that a random
    positive scores above a random negative, counting ties as half. This
    equals the trapezoidal area under the ROC curve.
    """
    pairs = list(scored)
    n_pos = sum(1 for _, positive in pairs if positive)
    n_neg = len(pairs) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise DegenerateClassesError(
            f"need both classes, got {n_pos} positives / {n_neg} negatives"
        )
    ranks = _fractional_ranks([score for score, _ in pairs])
    pos_rank_sum = sum(r for r, (_, positive) in zip(ranks, pairs) if positive)
    u = pos_rank_sum - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * n_neg)


def _fractional_ranks(values: Sequence[float]) -> list:
    # 1-based ranks; ties share the mean rank of their block.
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        mean_rank = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = mean_rank
        i = j + 1
    return ranks
