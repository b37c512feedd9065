"""Dense grid containers for labels, probabilities, and logits."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

PROB_SUM_TOL = 1e-6


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class SegmentationMask:
    """H x W grid of hard class labels in [0, num_classes)."""

    labels: np.ndarray = field(repr=False)
    num_classes: int = 0

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.labels, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"labels must be a non-empty 2-D grid, got shape {arr.shape}")
        if arr.min() < 0 or arr.max() >= self.num_classes:
            raise ValidationError(
                f"labels must lie in [0, {self.num_classes}), "
                f"found range [{arr.min()}, {arr.max()}]"
            )
        object.__setattr__(self, "labels", _freeze(arr))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


@dataclass(frozen=True)
class ProbabilityMap:
    """K x H x W per-pixel class probabilities, summing to 1 at every pixel."""

    probs: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.probs, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValidationError(f"probs must be a K x H x W grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("probabilities must be finite")
        if arr.min() < -PROB_SUM_TOL or arr.max() > 1.0 + PROB_SUM_TOL:
            raise ValidationError("probabilities must lie in [0, 1]")
        sums = arr.sum(axis=0)
        if np.abs(sums - 1.0).max() > PROB_SUM_TOL:
            worst = float(np.abs(sums - 1.0).max())
            raise ValidationError(f"per-pixel probabilities must sum to 1 (max error {worst:g})")
        object.__setattr__(self, "probs", _freeze(arr))

    @property
    def num_classes(self) -> int:
        return self.probs.shape[0]

    @property
    def height(self) -> int:
        return self.probs.shape[1]

    @property
    def width(self) -> int:
        return self.probs.shape[2]


@dataclass(frozen=True)
class LogitMap:
    """K x H x W unconstrained real scores; softmax turns them into probabilities."""

    values: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 3 or min(arr.shape) < 1:
            raise ValidationError(f"values must be a K x H x W grid, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("logits must be finite")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def num_classes(self) -> int:
        return self.values.shape[0]

    @property
    def height(self) -> int:
        return self.values.shape[1]

    @property
    def width(self) -> int:
        return self.values.shape[2]


def softmax(logits: LogitMap) -> ProbabilityMap:
    """Per-pixel softmax with max-subtraction for numerical stability."""
    return ProbabilityMap(softmax_array(logits.values))


def softmax_array(values: np.ndarray) -> np.ndarray:
    shifted = values - values.max(axis=0, keepdims=True)
    ex = np.exp(shifted)
    return ex / ex.sum(axis=0, keepdims=True)


def argmax_mask(probs: ProbabilityMap) -> SegmentationMask:
    """Per-pixel argmax; ties break toward the lowest class index."""
    return SegmentationMask(np.argmax(probs.probs, axis=0), probs.num_classes)


def one_hot(mask: SegmentationMask, num_classes: int | None = None) -> ProbabilityMap:
    """Exact 0/1 probability map of a hard label mask."""
    K = mask.num_classes if num_classes is None else int(num_classes)
    if int(mask.labels.max()) >= K:
        raise ValidationError(
            f"num_classes {K} is smaller than max label {int(mask.labels.max())} + 1"
        )
    probs = np.zeros((K, mask.height, mask.width), dtype=np.float64)
    rows, cols = np.indices(mask.labels.shape)
    probs[mask.labels, rows, cols] = 1.0
    return ProbabilityMap(probs)
