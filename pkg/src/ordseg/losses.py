"""Loss terms for ordinal segmentation: CE, O2, CSNP, CSDT.

Every term returns its scalar value together with the analytic gradient with
respect to its direct input (probabilities, or logits for the combined loss).
A central finite-difference checker verifies the gradients independently.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dtransform import METRICS, ActivationMask, distance_transform, saturate
from .errors import ValidationError
from .maps import LogitMap, ProbabilityMap, SegmentationMask, softmax
from .order import ClassOrder, cost_matrix, ordinal_pair_sets

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class LossConfig:
    """Weights and parameters of the combined loss."""

    lambda_o2: float = 0.0
    lambda_csnp: float = 0.0
    lambda_csdt: float = 0.0
    delta_margin: float = 0.05
    delta_dt: float = 0.5
    gamma: float = 10.0
    dt_metric: str = "euclidean"

    def __post_init__(self) -> None:
        for name in ("lambda_o2", "lambda_csnp", "lambda_csdt"):
            if getattr(self, name) < 0:
                raise ValidationError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0.0 < self.delta_dt < 1.0:
            raise ValidationError(f"delta_dt must lie in (0, 1), got {self.delta_dt}")
        if not self.gamma > 0:
            raise ValidationError(f"gamma must be > 0, got {self.gamma}")
        if self.dt_metric not in METRICS:
            raise ValidationError(f"unknown dt_metric {self.dt_metric!r}")


@dataclass(frozen=True)
class LossReport:
    """Scalar loss value plus gradient and per-term breakdown."""

    value: float
    gradient: np.ndarray = field(repr=False)
    term_breakdown: dict = field(default_factory=dict)


def _as_probs(probs) -> np.ndarray:
    """Accept a ProbabilityMap or a raw (K, H, W) array.

    Raw arrays skip simplex validation; this is what lets finite-difference
    probes step slightly off the simplex when verifying gradients.
    """
    if isinstance(probs, ProbabilityMap):
        return probs.probs
    arr = np.ascontiguousarray(probs, dtype=np.float64)
    if arr.ndim != 3:
        raise ValidationError(f"probabilities must be K x H x W, got shape {arr.shape}")
    return arr


def _check_shapes(p: np.ndarray, target: SegmentationMask) -> None:
    if p.shape[1:] != target.labels.shape:
        raise ValidationError(
            f"probability map {p.shape[1]}x{p.shape[2]} does not match "
            f"target mask {target.height}x{target.width}"
        )
    if target.num_classes > p.shape[0]:
        raise ValidationError(
            f"target has {target.num_classes} classes but map only {p.shape[0]}"
        )


def cross_entropy(probs, target: SegmentationMask) -> LossReport:
    """Mean negative log-probability of the target class per pixel."""
    p = _as_probs(probs)
    _check_shapes(p, target)
    h, w = target.height, target.width
    rows, cols = np.indices(target.labels.shape)
    p_t = np.maximum(p[target.labels, rows, cols], LOG_CLAMP)
    value = float(-np.log(p_t).mean())
    grad = np.zeros_like(p)
    grad[target.labels, rows, cols] = -1.0 / (h * w * p_t)
    return LossReport(value, grad, {"ce": value})


def o2_term(
    probs,
    target: SegmentationMask,
    order: ClassOrder,
    delta_margin: float = 0.05,
) -> LossReport:
    """Margin penalty enforcing unimodality around the target class per pixel."""
    p = _as_probs(probs)
    _check_shapes(p, target)
    if order.num_classes != p.shape[0]:
        raise ValidationError(
            f"order has {order.num_classes} classes but map has {p.shape[0]}"
        )
    h, w = target.height, target.width
    grad = np.zeros_like(p)
    total = 0.0
    scale = 1.0 / (h * w)
    for y in np.unique(target.labels):
        rows, cols = np.nonzero(target.labels == y)
        ascending, descending = ordinal_pair_sets(order, int(y))
        for a, b in ascending + descending:
            arg = delta_margin + p[a, rows, cols] - p[b, rows, cols]
            pos = arg > 0  # subgradient 0 at the kink
            total += float(arg[pos].sum())
            grad[a, rows[pos], cols[pos]] += scale
            grad[b, rows[pos], cols[pos]] -= scale
    value = total * scale
    return LossReport(value, grad, {"o2": value})


def csnp_term(probs, order: ClassOrder) -> LossReport:
    """Neighbor-pixel product penalty between non-ordinally-adjacent classes.

    For every ordered class pair with positive cost, the horizontal and
    vertical neighbor-product means are averaged, weighted by the cost, and
    the result is averaged over the qualifying pairs.
    """
    p = _as_probs(probs)
    if order.num_classes != p.shape[0]:
        raise ValidationError(
            f"order has {order.num_classes} classes but map has {p.shape[0]}"
        )
    K, h, w = p.shape
    costs = cost_matrix(order).costs
    pairs = [
        (k1, k2)
        for k1 in range(K)
        for k2 in range(K)
        if k1 != k2 and costs[k1, k2] > 0
    ]
    grad = np.zeros_like(p)
    if not pairs:
        return LossReport(0.0, grad, {"csnp": 0.0})
    count = len(pairs)
    nx = h * (w - 1)
    ny = (h - 1) * w
    total = 0.0
    for k1, k2 in pairs:
        cost = costs[k1, k2]
        if nx > 0:
            dx = p[k1, :, :-1] * p[k2, :, 1:]
            total += cost * dx.sum() / nx / 2.0
            wx = cost / (2.0 * count * nx)
            grad[k1, :, :-1] += wx * p[k2, :, 1:]
            grad[k2, :, 1:] += wx * p[k1, :, :-1]
        if ny > 0:
            dy = p[k1, :-1, :] * p[k2, 1:, :]
            total += cost * dy.sum() / ny / 2.0
            wy = cost / (2.0 * count * ny)
            grad[k1, :-1, :] += wy * p[k2, 1:, :]
            grad[k2, 1:, :] += wy * p[k1, :-1, :]
    value = total / count
    return LossReport(float(value), grad, {"csnp": float(value)})


def csdt_term(
    probs,
    order: ClassOrder,
    delta_dt: float = 0.5,
    gamma: float = 10.0,
    dt_metric: str = "euclidean",
) -> LossReport:
    """Saturated distance-transform separation reward (non-positive value).

    Each qualifying class pair multiplies one class's probabilities with the
    other's saturated distance transform; the mean over the nonzero entries is
    rewarded (negated).  Gradients flow only through the probability factors:
    the thresholded distance transform is a constant of the input.
    """
    p = _as_probs(probs)
    if order.num_classes != p.shape[0]:
        raise ValidationError(
            f"order has {order.num_classes} classes but map has {p.shape[0]}"
        )
    K = p.shape[0]
    costs = cost_matrix(order).costs
    pairs = [(k1, k2) for k1 in range(K) for k2 in range(k1 + 1, K) if costs[k1, k2] > 0]
    grad = np.zeros_like(p)
    if not pairs:
        return LossReport(0.0, grad, {"csdt": 0.0})
    needed = sorted({k for pair in pairs for k in pair})
    dts = {}
    for k in needed:
        dist = distance_transform(ActivationMask(p[k] >= delta_dt, delta_dt), dt_metric)
        dts[k] = saturate(dist, gamma).values
    count = len(pairs)
    total = 0.0
    for k1, k2 in pairs:
        cost = costs[k1, k2]
        calc = p[k1] * dts[k2] + p[k2] * dts[k1]
        nz = calc != 0
        n = int(nz.sum())
        if n == 0:
            continue  # mean over an empty set contributes nothing
        total += cost * float(calc[nz].sum()) / n
        scale = cost / (n * count * gamma)
        grad[k1][nz] -= scale * dts[k2][nz]
        grad[k2][nz] -= scale * dts[k1][nz]
    value = -total / (count * gamma)
    return LossReport(float(value), grad, {"csdt": float(value)})


def combined_loss(
    logits: LogitMap,
    target: SegmentationMask,
    order: ClassOrder,
    config: LossConfig,
    full_breakdown: bool = True,
) -> LossReport:
    """CE plus weighted regularizers; gradient taken with respect to logits.

    ``full_breakdown=False`` skips evaluating zero-weight terms (reported as
    0.0 in the breakdown); the value and gradient are unaffected.
    """
    probs = softmax(logits)
    weights = {
        "ce": 1.0,
        "o2": config.lambda_o2,
        "csnp": config.lambda_csnp,
        "csdt": config.lambda_csdt,
    }
    makers = {
        "ce": lambda: cross_entropy(probs, target),
        "o2": lambda: o2_term(probs, target, order, config.delta_margin),
        "csnp": lambda: csnp_term(probs, order),
        "csdt": lambda: csdt_term(
            probs, order, config.delta_dt, config.gamma, config.dt_metric
        ),
    }
    zero = LossReport(0.0, np.zeros_like(probs.probs))
    reports = {
        name: make() if full_breakdown or weights[name] != 0.0 else zero
        for name, make in makers.items()
    }
    value = sum(weights[name] * rep.value for name, rep in reports.items())
    grad_p = sum(weights[name] * rep.gradient for name, rep in reports.items())
    p = probs.probs
    # Softmax Jacobian chain: dL/dz_k = p_k * (g_k - sum_j g_j p_j).
    inner = (grad_p * p).sum(axis=0, keepdims=True)
    grad_z = p * (grad_p - inner)
    breakdown = {name: rep.value for name, rep in reports.items()}
    return LossReport(float(value), grad_z, breakdown)


@dataclass(frozen=True)
class FiniteDifferenceReport:
    max_rel_error: float
    num_checked: int
    num_excluded: int
    tolerance: float

    @property
    def passed(self) -> bool:
        return self.num_checked > 0 and self.max_rel_error < self.tolerance


def finite_difference_check(
    fn,
    x0: np.ndarray,
    h: float = 1e-5,
    num_coords: int = 200,
    rng: np.random.Generator | None = None,
    kink_distance: np.ndarray | None = None,
    tolerance: float = 1e-5,
) -> FiniteDifferenceReport:
    """Compare an analytic gradient against central finite differences.

    ``fn`` maps an array to ``(value, gradient)``.  A random subsample of
    coordinates is probed; coordinates whose ``kink_distance`` entry is within
    ``10 * h`` of a ReLU kink or threshold boundary are excluded.
    """
    if not h > 0:
        raise ValidationError(f"h must be > 0, got {h}")
    if rng is None:
        rng = np.random.default_rng(0)
    x0 = np.asarray(x0, dtype=np.float64)
    size = x0.size
    take = min(num_coords, size)
    coords = rng.choice(size, size=take, replace=False)
    if kink_distance is not None:
        kd = np.asarray(kink_distance, dtype=np.float64).reshape(-1)
    else:
        kd = None
    _, grad = fn(x0)
    grad = np.asarray(grad, dtype=np.float64).reshape(-1)
    max_err = 0.0
    checked = 0
    excluded = 0
    flat = x0.reshape(-1)
    for idx in coords:
        if kd is not None and kd[idx] < 10.0 * h:
            excluded += 1
            continue
        xp = flat.copy()
        xp[idx] += h
        xm = flat.copy()
        xm[idx] -= h
        vp, _ = fn(xp.reshape(x0.shape))
        vm, _ = fn(xm.reshape(x0.shape))
        fd = (vp - vm) / (2.0 * h)
        a = grad[idx]
        scale = max(abs(a), abs(fd))
        err = abs(a - fd) / scale if scale > 1e-6 else abs(a - fd)
        max_err = max(max_err, err)
        checked += 1
    return FiniteDifferenceReport(max_err, checked, excluded, tolerance)


def o2_kink_distance(
    probs, target: SegmentationMask, order: ClassOrder, delta_margin: float
) -> np.ndarray:
    """Per-coordinate distance to the nearest O2 ReLU kink (pixel-wise min)."""
    p = _as_probs(probs)
    dist = np.full((target.height, target.width), np.inf)
    for y in np.unique(target.labels):
        pix = target.labels == y
        ascending, descending = ordinal_pair_sets(order, int(y))
        for a, b in ascending + descending:
            arg = np.abs(delta_margin + p[a] - p[b])
            dist[pix] = np.minimum(dist[pix], arg[pix])
    return np.broadcast_to(dist, p.shape).copy()


def csdt_kink_distance(probs, delta_dt: float) -> np.ndarray:
    """Per-coordinate distance to the activation threshold (pixel-wise min)."""
    p = _as_probs(probs)
    dist = np.abs(p - delta_dt).min(axis=0)
    return np.broadcast_to(dist, p.shape).copy()
