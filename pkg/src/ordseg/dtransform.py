"""Thresholded activation masks and exact distance transforms."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ValidationError
from .maps import ProbabilityMap

METRICS = ("euclidean", "chessboard", "manhattan")


@dataclass(frozen=True)
class ActivationMask:
    """Boolean grid of pixels whose probability met the activation threshold."""

    active: np.ndarray = field(repr=False)
    threshold: float = 0.5

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.active, dtype=bool)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise ValidationError(f"active must be a non-empty 2-D grid, got shape {arr.shape}")
        arr.setflags(write=False)
        object.__setattr__(self, "active", arr)


@dataclass(frozen=True)
class DistanceMap:
    """Per-pixel distance to the nearest active pixel; +inf when none exists."""

    values: np.ndarray = field(repr=False)
    metric: str = "euclidean"
    cap: float | None = None

    def __post_init__(self) -> None:
        arr = np.ascontiguousarray(self.values, dtype=np.float64)
        if arr.ndim != 2 or min(arr.shape) < 1:
            raise ValidationError(f"values must be a non-empty 2-D grid, got shape {arr.shape}")
        if self.metric not in METRICS:
            raise ValidationError(f"unknown metric {self.metric!r}; expected one of {METRICS}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)


def activation_mask(probs: ProbabilityMap, channel: int, threshold: float = 0.5) -> ActivationMask:
    """Pixels where the channel probability is >= threshold (closed inequality)."""
    if not 0 <= channel < probs.num_classes:
        raise ValidationError(f"channel {channel} outside [0, {probs.num_classes})")
    return ActivationMask(probs.probs[channel] >= threshold, threshold)


def distance_transform(active: ActivationMask, metric: str = "euclidean") -> DistanceMap:
    """Exact minimum distance from every pixel to the active set.

    Euclidean uses a two-pass parabola-envelope transform; chessboard and
    manhattan use two raster sweeps.  With no active pixel every value is +inf.
    """
    if metric not in METRICS:
        raise ValidationError(f"unknown metric {metric!r}; expected one of {METRICS}")
    grid = np.ascontiguousarray(active.active, dtype=np.uint8)
    if metric == "euclidean":
        dist = np.sqrt(_kernels.edt_sq(grid))
        empty = dist >= np.sqrt(_kernels.BIG) / 2
    else:
        dist = _kernels.chamfer(grid, metric == "chessboard")
        empty = dist >= _kernels.BIG / 2
    if empty.any():
        dist = dist.copy()
        dist[empty] = np.inf
    return DistanceMap(dist, metric)


def saturate(dist: DistanceMap, gamma: float) -> DistanceMap:
    """Cap every distance at gamma; +inf sentinels become gamma."""
    if not gamma > 0:
        raise ValidationError(f"gamma must be > 0, got {gamma}")
    return DistanceMap(np.minimum(dist.values, gamma), dist.metric, cap=float(gamma))
