import math

import numpy as np
import pytest

from ordseg.errors import ValidationError
from ordseg.maps import (
    LogitMap,
    ProbabilityMap,
    SegmentationMask,
    argmax_mask,
    one_hot,
    softmax,
)


def test_softmax_uniform():
    probs = softmax(LogitMap(np.zeros((4, 2, 3))))
    np.testing.assert_allclose(probs.probs, 0.25)


def test_softmax_shift_invariance():
    rng = np.random.default_rng(3)
    z = rng.standard_normal((3, 4, 4))
    shifted = z + 7.5  # same constant on every channel
    np.testing.assert_allclose(
        softmax(LogitMap(z)).probs, softmax(LogitMap(shifted)).probs, atol=1e-12
    )


def test_softmax_closed_form():
    z = np.array([0.0, math.log(2), math.log(4)]).reshape(3, 1, 1)
    probs = softmax(LogitMap(z)).probs[:, 0, 0]
    np.testing.assert_allclose(probs, [1 / 7, 2 / 7, 4 / 7], rtol=1e-14)


def test_softmax_sums_extreme_magnitudes():
    rng = np.random.default_rng(11)
    for _ in range(20):
        z = rng.uniform(-1e4, 1e4, size=(5, 3, 3))
        probs = softmax(LogitMap(z)).probs
        np.testing.assert_allclose(probs.sum(axis=0), 1.0, atol=1e-6)


def test_softmax_rejects_non_finite():
    with pytest.raises(ValidationError):
        LogitMap(np.array([[[np.inf]]]))


def test_argmax_one_hot_identity():
    rng = np.random.default_rng(5)
    for _ in range(20):
        labels = rng.integers(0, 4, size=(6, 5))
        mask = SegmentationMask(labels, 4)
        assert (argmax_mask(one_hot(mask, 4)).labels == labels).all()


def test_argmax_tie_breaks_low():
    probs = ProbabilityMap(np.full((3, 1, 1), 1 / 3))
    assert argmax_mask(probs).labels[0, 0] == 0


def test_argmax_plain():
    probs = ProbabilityMap(np.array([0.2, 0.5, 0.3]).reshape(3, 1, 1))
    assert argmax_mask(probs).labels[0, 0] == 1


def test_one_hot_single_pixel():
    mask = SegmentationMask(np.array([[2]]), 3)
    np.testing.assert_array_equal(one_hot(mask, 3).probs[:, 0, 0], [0, 0, 1])


def test_one_hot_k1():
    mask = SegmentationMask(np.zeros((2, 2), dtype=int), 1)
    np.testing.assert_array_equal(one_hot(mask, 1).probs, np.ones((1, 2, 2)))


def test_one_hot_k_too_small():
    mask = SegmentationMask(np.array([[2]]), 3)
    with pytest.raises(ValidationError):
        one_hot(mask, 2)


def test_probability_map_validates_sums():
    bad = np.full((2, 1, 1), 0.6)
    with pytest.raises(ValidationError, match="sum to 1"):
        ProbabilityMap(bad)


def test_mask_validates_labels():
    with pytest.raises(ValidationError):
        SegmentationMask(np.array([[4]]), 3)
