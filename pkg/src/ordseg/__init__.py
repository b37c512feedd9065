"""Ordinal semantic segmentation: losses, consistency metrics, and tooling."""

__version__ = "0.1.0"

from .order import ClassOrder, cost_matrix, ordinal_pair_sets, path_lengths
from .maps import LogitMap, ProbabilityMap, SegmentationMask, argmax_mask, one_hot, softmax
from .dtransform import ActivationMask, DistanceMap, activation_mask, distance_transform, saturate
from .losses import (
    LossConfig,
    LossReport,
    combined_loss,
    cross_entropy,
    csdt_term,
    csnp_term,
    finite_difference_check,
    o2_term,
)
from .metrics import (
    MetricReport,
    contact_surface,
    dice_macro,
    structural_consistency_check,
    unimodal_pixels,
)
from .encoding import CumulativeMap, consistency_correct, decode, ordinal_encode

__all__ = [
    "ClassOrder",
    "cost_matrix",
    "ordinal_pair_sets",
    "path_lengths",
    "SegmentationMask",
    "ProbabilityMap",
    "LogitMap",
    "softmax",
    "argmax_mask",
    "one_hot",
    "ActivationMask",
    "DistanceMap",
    "activation_mask",
    "distance_transform",
    "saturate",
    "LossConfig",
    "LossReport",
    "cross_entropy",
    "o2_term",
    "csnp_term",
    "csdt_term",
    "combined_loss",
    "finite_difference_check",
    "MetricReport",
    "dice_macro",
    "contact_surface",
    "unimodal_pixels",
    "structural_consistency_check",
    "CumulativeMap",
    "ordinal_encode",
    "consistency_correct",
    "decode",
    "__version__",
]
