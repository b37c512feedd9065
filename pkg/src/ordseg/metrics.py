"""Evaluation metrics: macro Dice, contact surface, unimodal pixels."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .maps import ProbabilityMap, SegmentationMask
from .order import ClassOrder, maximal_chains, path_lengths


@dataclass(frozen=True)
class MetricReport:
    """Named metric values in [0, 1] plus the per-class dice vector."""

    values: dict = field(default_factory=dict)
    dice_per_class: np.ndarray | None = None

    def __getitem__(self, name: str) -> float:
        return self.values[name]


def dice_macro(pred: SegmentationMask, target: SegmentationMask, num_classes: int) -> MetricReport:
    """Per-class Dice and its macro mean.

    Classes absent from both masks are excluded from the mean; a class that is
    predicted but absent from the target scores 0.
    """
    if pred.labels.shape != target.labels.shape:
        raise ValidationError(
            f"pred {pred.labels.shape} and target {target.labels.shape} shapes differ"
        )
    per_class = np.zeros(num_classes)
    included = []
    for k in range(num_classes):
        p = pred.labels == k
        t = target.labels == k
        denom = int(p.sum()) + int(t.sum())
        if denom == 0:
            per_class[k] = np.nan
            continue
        per_class[k] = 2.0 * int((p & t).sum()) / denom
        included.append(k)
    macro = float(np.mean(per_class[included])) if included else 0.0
    return MetricReport({"dice_macro": macro}, dice_per_class=per_class)


def _jump_table(order: ClassOrder) -> np.ndarray:
    """Ordinal jump magnitude between every label pair.

    Chains use |i - j|.  Partial orders use the Hasse path distance
    max(l[m,n], l[n,m]); incomparable distinct labels count as an invalid
    jump and are assigned magnitude 2.
    """
    K = order.num_classes
    if order.is_chain:
        idx = np.arange(K)
        return np.abs(idx[:, None] - idx[None, :]).astype(np.int64)
    lengths = path_lengths(order).lengths
    jump = np.maximum(lengths, lengths.T)
    incomparable = (jump == 0) & ~np.eye(K, dtype=bool)
    jump = jump.copy()
    jump[incomparable] = 2
    return jump


def contact_surface(pred: SegmentationMask, order: ClassOrder) -> float:
    """Fraction of class-boundary pixel pairs whose ordinal jump exceeds 1.

    Horizontal and vertical directions are averaged; a direction with no
    boundary at all contributes 0.
    """
    if int(pred.labels.max()) >= order.num_classes:
        raise ValidationError(
            f"mask labels exceed order classes ({int(pred.labels.max())} >= {order.num_classes})"
        )
    jump = _jump_table(order)
    labels = pred.labels
    ratios = []
    for a, b in ((labels[:, :-1], labels[:, 1:]), (labels[:-1, :], labels[1:, :])):
        if a.size == 0:
            ratios.append(0.0)
            continue
        mags = jump[a, b]
        boundary = int((mags >= 1).sum())
        invalid = int((mags >= 2).sum())
        ratios.append(invalid / boundary if boundary > 0 else 0.0)
    return 0.5 * ratios[0] + 0.5 * ratios[1]


def _unimodal_along(p: np.ndarray) -> np.ndarray:
    """Pixel-wise non-strict unimodality of a (K, H, W) probability stack."""
    if p.shape[0] <= 2:
        return np.ones(p.shape[1:], dtype=bool)
    diffs = np.diff(p, axis=0)
    rising = diffs > 0
    falling = diffs < 0
    n = diffs.shape[0]
    steps = np.arange(n).reshape(n, 1, 1)
    # Unimodal iff every strict rise comes before every strict fall.
    last_rise = np.where(rising, steps, -1).max(axis=0)
    first_fall = np.where(falling, steps, n).min(axis=0)
    return last_rise <= first_fall


def unimodal_pixels(probs: ProbabilityMap, order: ClassOrder | None = None) -> float:
    """Fraction of pixels whose class-probability vector is unimodal.

    Plateaus are allowed (non-strict).  For partial orders a pixel counts as
    unimodal only if it is unimodal along every maximal chain of the Hasse
    diagram.
    """
    p = probs.probs
    if order is None or order.is_chain:
        ok = _unimodal_along(p)
    else:
        ok = np.ones(p.shape[1:], dtype=bool)
        for chain in maximal_chains(order):
            ok &= _unimodal_along(p[list(chain)])
    return float(ok.mean())


def structural_consistency_check(
    pred: SegmentationMask, order: ClassOrder
) -> tuple[bool, tuple[tuple[int, int], tuple[int, int]] | None]:
    """True iff every 4-neighborhood ordinal jump is at most 1.

    On failure, returns the first violating pixel pair in row-major order
    (right neighbor checked before the down neighbor).
    """
    if int(pred.labels.max()) >= order.num_classes:
        raise ValidationError(
            f"mask labels exceed order classes ({int(pred.labels.max())} >= {order.num_classes})"
        )
    jump = _jump_table(order)
    labels = pred.labels
    h, w = labels.shape
    horiz_ok = not (jump[labels[:, :-1], labels[:, 1:]] > 1).any() if w > 1 else True
    vert_ok = not (jump[labels[:-1, :], labels[1:, :]] > 1).any() if h > 1 else True
    if horiz_ok and vert_ok:
        return True, None
    for i in range(h):
        for j in range(w):
            if j + 1 < w and jump[labels[i, j], labels[i, j + 1]] > 1:
                return False, ((i, j), (i, j + 1))
            if i + 1 < h and jump[labels[i, j], labels[i + 1, j]] > 1:
                return False, ((i, j), (i + 1, j))
    return True, None
