"""Waveform and classification metrics: SI-SDR, accuracy, EER."""

from __future__ import annotations

import numpy as np

from .errors import MetricError, ShapeError

SI_SDR_CAP = 100.0


def si_sdr(estimate, reference, zero_mean: bool = True) -> float:
    """Scale-invariant signal-to-distortion ratio in dB, capped to [-100, 100].

    The reference-aligned target is (<est, ref>/<ref, ref>) * ref; the result
    is 10*log10(||target||^2 / ||est - target||^2). An exact match reports the
    +100 cap.
    """
    est = np.asarray(estimate, dtype=np.float64)
    ref = np.asarray(reference, dtype=np.float64)
    if est.shape != ref.shape:
        raise ShapeError(f"length mismatch: estimate {est.shape} vs reference {ref.shape}")
    if zero_mean:
        est = est - est.mean()
        ref = ref - ref.mean()
    ref_energy = float(np.dot(ref, ref))
    if ref_energy == 0.0:
        raise MetricError("reference has zero power")
    target = (np.dot(est, ref) / ref_energy) * ref
    noise = est - target
    num = float(np.dot(target, target))
    den = float(np.dot(noise, noise))
    if den == 0.0:
        return SI_SDR_CAP
    if num == 0.0:
        return -SI_SDR_CAP
    return float(np.clip(10.0 * np.log10(num / den), -SI_SDR_CAP, SI_SDR_CAP))


def accuracy(predictions, labels) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ShapeError(f"predictions {predictions.shape} vs labels {labels.shape}")
    if predictions.size == 0:
        raise MetricError("accuracy of empty prediction set")
    return float(np.mean(predictions == labels))


def eer(trials) -> float:
    """Equal error rate from (score, is_same_speaker) trials.

    Sweeps every unique score as an accept-if-score>=threshold operating point
    (plus a reject-all sentinel), then linearly interpolates FAR/FRR between
    the two points bracketing the FAR == FRR crossing.
    """
    scores = np.asarray([s for s, _ in trials], dtype=np.float64)
    labels = np.asarray([bool(l) for _, l in trials])
    n_pos = int(labels.sum())
    n_neg = int(labels.size - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise MetricError("EER requires at least one positive and one negative trial")

    thresholds = np.unique(scores)
    # counts at threshold t: FAR = #neg >= t / n_neg, FRR = #pos < t / n_pos
    order = np.argsort(scores, kind="stable")
    sorted_scores = scores[order]
    sorted_pos = labels[order].astype(np.int64)
    cum_pos = np.concatenate([[0], np.cumsum(sorted_pos)])           # pos with score < kth
    idx = np.searchsorted(sorted_scores, thresholds, side="left")
    pos_below = cum_pos[idx]
    neg_below = idx - pos_below
    far = (n_neg - neg_below) / n_neg
    frr = pos_below / n_pos
    far = np.concatenate([far, [0.0]])   # +inf sentinel: reject everything
    frr = np.concatenate([frr, [1.0]])

    for j in range(len(far)):
        if far[j] <= frr[j]:
            if far[j] == frr[j]:
                return float(far[j])
            f1, r1 = far[j - 1], frr[j - 1]
            f2, r2 = far[j], frr[j]
            alpha = (f1 - r1) / ((f1 - r1) - (f2 - r2))
            return float(f1 + alpha * (f2 - f1))
    raise MetricError("EER sweep found no crossing")  # unreachable: sentinel guarantees one
