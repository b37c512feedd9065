"""Ordinal ground-truth encoding and cumulative probability correction."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .maps import SegmentationMask

MONOTONE_TOL = 1e-9


@dataclass(frozen=True)
class CumulativeMap:
    """(K-1) x H x W exceedance probabilities: channel k holds P(label > k)."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValidationError(f"values must be a (K-1) x H x W grid, got shape {arr.shape}")
        if arr.min() < -MONOTONE_TOL or arr.max() > 1.0 + MONOTONE_TOL:
            raise ValidationError("cumulative probabilities must lie in [0, 1]")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    @property
    def num_classes(self) -> int:
        return self.values.shape[0] + 1

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]

    def is_monotone(self) -> bool:
        if self.values.shape[0] < 2:
            return True
        return bool((np.diff(self.values, axis=0) <= MONOTONE_TOL).all())


def ordinal_encode(mask: SegmentationMask, num_classes: int | None = None) -> CumulativeMap:
    """Encode hard labels as exceedance indicators: channel k is 1 where label > k."""
    K = mask.num_classes if num_classes is None else int(num_classes)
    if K < 2:
        raise ValidationError(f"ordinal encoding needs at least 2 classes, got {K}")
    if int(mask.labels.max()) >= K:
        raise ValidationError(
            f"num_classes {K} is smaller than max label {int(mask.labels.max())} + 1"
        )
    thresholds = np.arange(K - 1).reshape(K - 1, 1, 1)
    return CumulativeMap((mask.labels[None, :, :] > thresholds).astype(np.float64))


def consistency_correct(raw: CumulativeMap) -> CumulativeMap:
    """Chain the raw conditional outputs into monotone exceedance probabilities.

    Channel 0 is kept as-is; channel k becomes raw[k] * corrected[k-1].  The
    correction is unconditional: already-monotone inputs are transformed too.
    """
    return CumulativeMap(np.cumprod(raw.values, axis=0))


def conditional_from_cumulative(cum: CumulativeMap) -> CumulativeMap:
    """Exact inverse of consistency_correct on monotone inputs.

    Where a prefix probability is 0 the conditional is undefined; it is set to
    0, which reproduces the same cumulative map after re-correction.
    """
    values = cum.values
    cond = values.copy()
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = values[1:] / values[:-1]
    ratio[~np.isfinite(ratio)] = 0.0
    cond[1:] = ratio
    return CumulativeMap(np.clip(cond, 0.0, 1.0))


def decode(cum: CumulativeMap, threshold: float = 0.5) -> SegmentationMask:
    """Label = number of exceedance channels at or above the threshold."""
    if not cum.is_monotone():
        raise ValidationError("cumulative map is not monotone; apply consistency_correct first")
    labels = (cum.values >= threshold).sum(axis=0)
    return SegmentationMask(labels, cum.num_classes)
