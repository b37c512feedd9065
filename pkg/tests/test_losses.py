import math

import numpy as np
import pytest

from ordseg.errors import ValidationError
from ordseg.losses import (
    LossConfig,
    combined_loss,
    cross_entropy,
    csdt_kink_distance,
    csdt_term,
    csnp_term,
    finite_difference_check,
    o2_kink_distance,
    o2_term,
)
from ordseg.maps import LogitMap, ProbabilityMap, SegmentationMask, one_hot, softmax
from ordseg.order import ClassOrder


def random_probs(rng, k, h, w):
    """Random strictly positive map summing to 1 per pixel."""
    raw = rng.uniform(0.05, 1.0, size=(k, h, w))
    return raw / raw.sum(axis=0, keepdims=True)


def random_mask(rng, k, h, w):
    return SegmentationMask(rng.integers(0, k, size=(h, w)), k)


def test_cross_entropy_one_hot_match():
    mask = SegmentationMask(np.array([[0, 1], [2, 1]]), 3)
    report = cross_entropy(one_hot(mask, 3), mask)
    assert report.value <= 1e-11


def test_cross_entropy_uniform():
    mask = SegmentationMask(np.zeros((2, 2), dtype=int), 4)
    probs = ProbabilityMap(np.full((4, 2, 2), 0.25))
    assert cross_entropy(probs, mask).value == pytest.approx(math.log(4), rel=1e-12)


def test_cross_entropy_half_gradient():
    mask = SegmentationMask(np.array([[1]]), 2)
    probs = np.array([0.5, 0.5]).reshape(2, 1, 1)
    report = cross_entropy(probs, mask)
    assert report.value == pytest.approx(math.log(2), rel=1e-12)
    assert report.gradient[1, 0, 0] == pytest.approx(-2.0)
    assert report.gradient[0, 0, 0] == 0.0


def test_cross_entropy_shape_mismatch():
    mask = SegmentationMask(np.zeros((2, 3), dtype=int), 2)
    with pytest.raises(ValidationError):
        cross_entropy(np.full((2, 3, 2), 0.5), mask)


def test_o2_zero_when_ordered():
    mask = SegmentationMask(np.array([[0]]), 3)
    probs = np.array([0.5, 0.3, 0.2]).reshape(3, 1, 1)
    assert o2_term(probs, mask, ClassOrder.chain(3), 0.05).value == 0.0


def test_o2_hand_value():
    mask = SegmentationMask(np.array([[0]]), 3)
    probs = np.array([0.2, 0.3, 0.5]).reshape(3, 1, 1)
    report = o2_term(probs, mask, ClassOrder.chain(3), 0.05)
    assert report.value == pytest.approx(0.40, abs=1e-12)


def test_o2_zero_on_strictly_unimodal_map():
    rng = np.random.default_rng(2)
    k, h, w = 4, 5, 6
    labels = rng.integers(0, k, size=(h, w))
    mask = SegmentationMask(labels, k)
    # Distance-to-target profile with slope 0.2 per step, margin >> 0.05.
    probs = np.empty((k, h, w))
    for c in range(k):
        probs[c] = 1.0 - 0.2 * np.abs(labels - c)
    probs = np.maximum(probs, 0.05)
    probs /= probs.sum(axis=0, keepdims=True)
    assert o2_term(probs, mask, ClassOrder.chain(k), 0.05).value == 0.0


def test_csnp_zero_on_consistent_one_hot():
    labels = np.array([[0, 1, 2], [0, 1, 2]])
    probs = one_hot(SegmentationMask(labels, 3), 3)
    assert csnp_term(probs, ClassOrder.chain(3)).value == 0.0


def test_csnp_hand_value():
    probs = np.zeros((3, 1, 2))
    probs[2, 0, 0] = 1.0
    probs[0, 0, 1] = 1.0
    report = csnp_term(probs, ClassOrder.chain(3))
    assert report.value == pytest.approx(0.25, abs=1e-15)


def test_csnp_k2_zero():
    rng = np.random.default_rng(4)
    probs = random_probs(rng, 2, 4, 4)
    report = csnp_term(probs, ClassOrder.chain(2))
    assert report.value == 0.0
    assert not report.gradient.any()


def test_csnp_zero_iff_a_factor_vanishes():
    # Exactly one qualifying adjacency with both factors positive.
    probs = np.zeros((3, 1, 2))
    probs[0, 0, 0] = 1.0
    probs[1, 0, 1] = 0.5
    probs[2, 0, 1] = 0.5
    assert csnp_term(probs, ClassOrder.chain(3)).value > 0.0
    probs[2, 0, 1] = 0.0
    probs[1, 0, 1] = 1.0
    assert csnp_term(probs, ClassOrder.chain(3)).value == 0.0


def test_csdt_k2_zero():
    rng = np.random.default_rng(5)
    probs = random_probs(rng, 2, 3, 3)
    assert csdt_term(probs, ClassOrder.chain(2)).value == 0.0


def test_csdt_zero_when_all_active():
    probs = np.full((3, 2, 2), 1.0 / 3)
    # Both qualifying classes active everywhere at threshold 1/3 means DT = 0.
    report = csdt_term(probs, ClassOrder.chain(3), delta_dt=1.0 / 3)
    assert report.value == 0.0


def test_csdt_hand_value():
    probs = np.zeros((3, 1, 4))
    probs[0, 0, :2] = 1.0
    probs[2, 0, 2:] = 1.0
    report = csdt_term(probs, ClassOrder.chain(3), delta_dt=0.5, gamma=10.0)
    assert report.value == pytest.approx(-0.15, abs=1e-12)


def test_combined_lambda_zero_is_cross_entropy():
    rng = np.random.default_rng(6)
    z = rng.standard_normal((3, 4, 4))
    mask = random_mask(rng, 3, 4, 4)
    report = combined_loss(LogitMap(z), mask, ClassOrder.chain(3), LossConfig())
    expected = cross_entropy(softmax(LogitMap(z)), mask).value
    assert report.value == pytest.approx(expected, rel=1e-12)


def test_combined_easy_case_o2_component_zero():
    labels = np.array([[0, 0], [1, 1]])
    mask = SegmentationMask(labels, 3)
    # Strictly unimodal tails with gaps well above the 0.05 margin.
    weight = np.array([0.7, 0.2, 0.1])
    z = np.log(np.stack([weight[np.abs(labels - c)] for c in range(3)]))
    config = LossConfig(lambda_o2=1.0)
    report = combined_loss(LogitMap(z), mask, ClassOrder.chain(3), config)
    assert report.term_breakdown["o2"] == 0.0
    assert report.term_breakdown["ce"] > 0.0


def test_loss_config_validation():
    with pytest.raises(ValidationError):
        LossConfig(lambda_o2=-1.0)
    with pytest.raises(ValidationError):
        LossConfig(delta_dt=1.0)
    with pytest.raises(ValidationError):
        LossConfig(gamma=0.0)
    with pytest.raises(ValidationError):
        LossConfig(dt_metric="hamming")


def test_fd_check_rejects_bad_h():
    with pytest.raises(ValidationError):
        finite_difference_check(lambda x: (0.0, x), np.zeros(4), h=0.0)


@pytest.mark.parametrize("seed", range(5))
def test_cross_entropy_gradient_fd(seed):
    rng = np.random.default_rng(100 + seed)
    probs = random_probs(rng, 3, 4, 4)
    mask = random_mask(rng, 3, 4, 4)
    report = finite_difference_check(
        lambda x: (lambda r: (r.value, r.gradient))(cross_entropy(x, mask)),
        probs,
        rng=rng,
        tolerance=1e-6,
    )
    assert report.passed, report


@pytest.mark.parametrize("seed", range(5))
def test_o2_gradient_fd(seed):
    rng = np.random.default_rng(200 + seed)
    order = ClassOrder.chain(3)
    probs = random_probs(rng, 3, 4, 4)
    mask = random_mask(rng, 3, 4, 4)
    kinks = o2_kink_distance(probs, mask, order, 0.05)
    report = finite_difference_check(
        lambda x: (lambda r: (r.value, r.gradient))(o2_term(x, mask, order, 0.05)),
        probs,
        kink_distance=kinks,
        rng=rng,
    )
    assert report.passed, report


@pytest.mark.parametrize("seed", range(5))
def test_csnp_gradient_fd(seed):
    rng = np.random.default_rng(300 + seed)
    order = ClassOrder.chain(4)
    probs = random_probs(rng, 4, 4, 4)
    report = finite_difference_check(
        lambda x: (lambda r: (r.value, r.gradient))(csnp_term(x, order)),
        probs,
        rng=rng,
    )
    assert report.passed, report


@pytest.mark.parametrize("seed", range(5))
def test_csdt_gradient_fd(seed):
    rng = np.random.default_rng(400 + seed)
    order = ClassOrder.chain(3)
    probs = random_probs(rng, 3, 4, 4)
    kinks = csdt_kink_distance(probs, 0.5)
    report = finite_difference_check(
        lambda x: (lambda r: (r.value, r.gradient))(csdt_term(x, order)),
        probs,
        kink_distance=kinks,
        rng=rng,
    )
    assert report.passed, report


@pytest.mark.parametrize("seed", range(5))
def test_combined_gradient_fd(seed):
    rng = np.random.default_rng(500 + seed)
    order = ClassOrder.chain(3)
    z = rng.standard_normal((3, 4, 4))
    mask = random_mask(rng, 3, 4, 4)
    config = LossConfig(lambda_o2=0.7, lambda_csnp=1.3, lambda_csdt=0.9)
    p = softmax(LogitMap(z)).probs
    kinks = np.minimum(
        o2_kink_distance(p, mask, order, config.delta_margin),
        csdt_kink_distance(p, config.delta_dt),
    )

    def fn(x):
        r = combined_loss(LogitMap(x), mask, order, config)
        return r.value, r.gradient

    report = finite_difference_check(fn, z, kink_distance=kinks, rng=rng)
    assert report.passed, report


def test_chain_reduction_bit_identical():
    """Explicit (k, k+1) Hasse edges must reproduce the chain fast paths exactly."""
    rng = np.random.default_rng(9)
    for _ in range(50):
        k = int(rng.integers(2, 7))
        h, w = int(rng.integers(1, 6)), int(rng.integers(2, 6))
        probs = random_probs(rng, k, h, w)
        mask = random_mask(rng, k, h, w)
        chain = ClassOrder.chain(k)
        explicit = ClassOrder(k, edges=tuple((i, i + 1) for i in range(k - 1)))
        for make in (
            lambda o: o2_term(probs, mask, o, 0.05),
            lambda o: csnp_term(probs, o),
            lambda o: csdt_term(probs, o),
        ):
            a, b = make(chain), make(explicit)
            assert a.value == b.value
            np.testing.assert_array_equal(a.gradient, b.gradient)


def test_term_sign_invariants():
    rng = np.random.default_rng(10)
    for _ in range(20):
        k = int(rng.integers(2, 6))
        probs = random_probs(rng, k, 5, 5)
        mask = random_mask(rng, k, 5, 5)
        order = ClassOrder.chain(k)
        assert cross_entropy(probs, mask).value >= 0.0
        assert o2_term(probs, mask, order, 0.05).value >= 0.0
        assert csnp_term(probs, order).value >= 0.0
        csdt = csdt_term(probs, order).value
        assert csdt <= 0.0
        # DT^gamma / gamma <= 1 and probs <= 1 bound each pair term by its cost.
        assert csdt >= -(k - 2) * max(k - 2, 1)


def test_csnp_reversal_invariance():
    rng = np.random.default_rng(11)
    for _ in range(20):
        k = int(rng.integers(2, 6))
        probs = random_probs(rng, k, 4, 4)
        order = ClassOrder.chain(k)
        forward = csnp_term(probs, order).value
        reversed_probs = probs[::-1].copy()
        backward = csnp_term(reversed_probs, order).value
        assert forward == pytest.approx(backward, rel=1e-12, abs=1e-15)
