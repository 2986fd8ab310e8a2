"""Batch loss: dynamically weighted cross-entropy plus a false-positive-rate term.

Same-vehicle edges are a small minority of a dense cross-camera graph, and
the imbalance varies batch to batch, so class weights are recomputed from
each batch's own label histogram (inverse class frequency). A second term
penalizes the rate of false-positive edges, the error mode that merges
distinct vehicles. For training, the FPR uses soft counts (probability mass
over the negative edges) so it stays differentiable; it coincides with the
hard count rate whenever predictions are 0/1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PROB_FLOOR = 1e-12  # clamp for log() in standalone evaluation


@dataclass(frozen=True)
class LossBreakdown:
    weighted_ce: float
    fpr: float  # soft FPR term actually included in total (0.0 when disabled)
    total: float
    class_weights: tuple[float, float]
    counts: tuple[int, int]
    grad: np.ndarray  # dL_total/dy_hat, shape (E, 2)
    fpr_soft: float  # soft FPR, reported regardless of the toggle
    fpr_hard: float  # argmax-count FPR, for monitoring only


def _validate(predictions: np.ndarray, labels: np.ndarray):
    predictions = np.asarray(predictions, dtype=np.float64)
    labels = np.asarray(labels)
    if predictions.ndim != 2 or predictions.shape[1] != 2:
        raise ValueError(f"predictions must be (E, 2), got {predictions.shape}")
    if labels.shape != (predictions.shape[0],):
        raise ValueError(
            f"labels length {labels.shape} does not match predictions {predictions.shape}"
        )
    return predictions, labels.astype(np.int64)


def class_weights(labels) -> tuple[float, float]:
    """Inverse-frequency weights (n0+n1)/nc per class present in the batch.

    The weight slot of an absent class is reported as 0.0; it multiplies
    nothing, and no division by a zero count ever happens.
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise ValueError("empty batch")
    n1 = int(np.count_nonzero(labels))
    n0 = int(labels.size - n1)
    total = n0 + n1
    w0 = total / n0 if n0 else 0.0
    w1 = total / n1 if n1 else 0.0
    return w0, w1


def weighted_ce(predictions, labels, weights: tuple[float, float]) -> float:
    """Weighted mean cross-entropy: sum(w_y * CE) / sum(w_y)."""
    predictions, labels = _validate(predictions, labels)
    if predictions.shape[0] == 0:
        raise ValueError("empty batch")
    w = np.where(labels == 1, weights[1], weights[0])
    p_true = np.clip(predictions[np.arange(labels.size), labels], PROB_FLOOR, None)
    ce = -np.log(p_true)
    return float(np.sum(w * ce) / np.sum(w))


def soft_fpr(predictions, labels) -> float:
    """FP/(FP+TN) with probability mass as counts, over negative edges only.

    Returns 0.0 when the batch has no negative edges.
    """
    predictions, labels = _validate(predictions, labels)
    neg = labels == 0
    if not np.any(neg):
        return 0.0
    fp = float(np.sum(predictions[neg, 1]))
    tn = float(np.sum(predictions[neg, 0]))
    return fp / (fp + tn)


def hard_fpr(predictions, labels) -> float:
    """Argmax-count FP/(FP+TN); a tie (0.5, 0.5) counts as negative."""
    predictions, labels = _validate(predictions, labels)
    neg = labels == 0
    n0 = int(np.count_nonzero(neg))
    if n0 == 0:
        return 0.0
    fp = int(np.count_nonzero(predictions[neg, 1] > predictions[neg, 0]))
    return fp / n0


def total_loss(
    predictions,
    labels,
    use_weighting: bool = True,
    use_fpr: bool = True,
    logits: np.ndarray | None = None,
) -> LossBreakdown:
    """Weighted CE plus soft FPR, with the gradient w.r.t. predictions.

    ``use_weighting=False`` fixes both class weights at 1 (plain mean CE);
    ``use_fpr=False`` drops the FPR term from the total (it is still
    reported). When the classifier logits are available the CE value is
    computed through a fused log-sum-exp, avoiding log(0) for saturated
    probabilities; the gradient is identical either way.
    """
    predictions, labels = _validate(predictions, labels)
    n_edges = predictions.shape[0]
    if n_edges == 0:
        raise ValueError("empty batch")

    n1 = int(np.count_nonzero(labels))
    n0 = n_edges - n1
    if use_weighting:
        weights = class_weights(labels)
    else:
        weights = (1.0, 1.0)
    w = np.where(labels == 1, weights[1], weights[0])
    w_sum = float(np.sum(w))

    idx = np.arange(n_edges)
    if logits is not None:
        logits = np.asarray(logits, dtype=np.float64)
        if logits.shape != predictions.shape:
            raise ValueError(f"logits shape {logits.shape} != predictions shape")
        zmax = logits.max(axis=1)
        lse = zmax + np.log(np.sum(np.exp(logits - zmax[:, None]), axis=1))
        ce = lse - logits[idx, labels]
    else:
        ce = -np.log(np.clip(predictions[idx, labels], PROB_FLOOR, None))
    wce = float(np.sum(w * ce) / w_sum)

    grad = np.zeros_like(predictions)
    p_true = np.clip(predictions[idx, labels], PROB_FLOOR, None)
    grad[idx, labels] = -w / (w_sum * p_true)

    fpr_soft_val = soft_fpr(predictions, labels)
    fpr_hard_val = hard_fpr(predictions, labels)

    fpr_term = 0.0
    if use_fpr and n0 > 0:
        neg = labels == 0
        fp = float(np.sum(predictions[neg, 1]))
        tn = float(np.sum(predictions[neg, 0]))
        denom = fp + tn
        fpr_term = fp / denom
        # d(FP/(FP+TN)) by the quotient rule, negative edges only.
        grad[neg, 1] += tn / denom**2
        grad[neg, 0] += -fp / denom**2

    total = wce + fpr_term
    return LossBreakdown(
        weighted_ce=wce,
        fpr=fpr_term,
        total=total,
        class_weights=weights,
        counts=(n0, n1),
        grad=grad,
        fpr_soft=fpr_soft_val,
        fpr_hard=fpr_hard_val,
    )
