"""Desk-scale demonstration: synthetic ordinal scenes and logit descent.

Optimizing per-pixel logits directly (no network) isolates the loss math.
The interesting configuration is "fit the noise": the optimization target is
a label-noise-corrupted mask, so the ordinal regularizers visibly reduce the
contact-surface metric, while plain cross-entropy reproduces the noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import OrdsegError, ValidationError
from .losses import LossConfig, combined_loss
from .maps import LogitMap, ProbabilityMap, SegmentationMask, argmax_mask, one_hot, softmax
from .metrics import contact_surface, dice_macro, structural_consistency_check, unimodal_pixels
from .order import ClassOrder


@dataclass(frozen=True)
class SyntheticScene:
    """A clean nested-region mask plus its noise-corrupted starting logits."""

    mask: SegmentationMask
    noisy_mask: SegmentationMask
    noisy_logits: LogitMap
    noise_rate: float
    seed: int
    order: ClassOrder


@dataclass(frozen=True)
class TrainRun:
    config: LossConfig
    steps: int
    learning_rate: float
    seed: int
    target: str
    trace: tuple = ()  # per-step dicts: loss, dice, cs, up
    final_logits: LogitMap | None = None
    final_probs: ProbabilityMap | None = None
    final_mask: SegmentationMask | None = None


def _chain_rings(K, H, W, rng, eccentricity):
    cy = H / 2.0 + (rng.uniform(-1, 1) * 0.06 * H if eccentricity > 0 else 0.0)
    cx = W / 2.0 + (rng.uniform(-1, 1) * 0.06 * W if eccentricity > 0 else 0.0)
    sy = 1.0 - eccentricity * rng.uniform(0, 1)
    sx = 1.0 - eccentricity * rng.uniform(0, 1)
    ay = max(0.47 * H * sy, 1.0)
    ax = max(0.47 * W * sx, 1.0)
    ii, jj = np.indices((H, W))
    r = np.sqrt(((ii - cy) / ay) ** 2 + ((jj - cx) / ax) ** 2)
    labels = (K - 1) - np.minimum((r * (K - 1)).astype(np.int64), K - 1)
    return labels


def _tree_children(order: ClassOrder):
    edges = order.hasse_edges()
    children: dict[int, list[int]] = {k: [] for k in range(order.num_classes)}
    parents: dict[int, int] = {}
    for m, n in edges:
        if n in parents:
            raise ValidationError(
                "scene generation for partial orders requires a tree-shaped Hasse diagram "
                f"(class {n} has multiple parents)"
            )
        parents[n] = m
        children[m].append(n)
    roots = [k for k in range(order.num_classes) if k not in parents]
    if len(roots) != 1:
        raise ValidationError(
            f"scene generation requires a unique root class, found {len(roots)}"
        )
    return roots[0], children


def _tree_layout(order: ClassOrder, H, W, rng, shrink):
    root, children = _tree_children(order)
    labels = np.full((H, W), root, dtype=np.int64)
    ii, jj = np.indices((H, W))

    def place(cls, cy, cx, ay, ax):
        inside = ((ii - cy) / ay) ** 2 + ((jj - cx) / ax) ** 2 <= 1.0
        labels[inside] = cls
        kids = children[cls]
        if not kids:
            return
        n = len(kids)
        slot = 2.0 * ax / n
        for i, kid in enumerate(kids):
            kcx = cx - ax + slot * (i + 0.5)
            kax = max(slot / 2.0 * shrink, 0.8)
            kay = max(ay * shrink, 0.8)
            place(kid, cy, kcx, kay, kax)

    # Top-level children share the canvas side by side inside the root fill.
    n = len(children[root])
    if n:
        slot = W / n
        for i, kid in enumerate(children[root]):
            cx = slot * (i + 0.5)
            ax = max(slot / 2.0 * shrink, 0.8)
            ay = max(H / 2.0 * shrink, 0.8)
            place(kid, H / 2.0, cx, ay, ax)
    return labels


def generate_scene(
    num_classes: int,
    height: int,
    width: int,
    noise_rate: float,
    seed: int,
    order: ClassOrder | None = None,
    confidence: float = 4.0,
    jitter: float = 1.0,
) -> SyntheticScene:
    """Deterministic synthetic scene with nested class regions.

    The clean mask is structurally consistent and contains every class; the
    starting logits are scaled one-hot encodings of a label-noise-corrupted
    copy, plus a small Gaussian jitter so that the non-target channel ordering
    is random (this keeps the unimodal-pixels metric informative).
    """
    if num_classes < 2:
        raise ValidationError(f"need at least 2 classes, got {num_classes}")
    if height < 8 or width < 8:
        raise ValidationError(f"grid must be at least 8x8, got {height}x{width}")
    if not 0.0 <= noise_rate < 1.0:
        raise ValidationError(f"noise_rate must lie in [0, 1), got {noise_rate}")
    if order is None:
        order = ClassOrder.chain(num_classes)
    if order.num_classes != num_classes:
        raise ValidationError("order class count does not match num_classes")
    rng = np.random.default_rng(seed)
    K = num_classes
    labels = None
    if order.is_chain:
        for eccentricity in (0.25, 0.12, 0.0):
            cand = _chain_rings(K, height, width, rng, eccentricity)
            if len(np.unique(cand)) == K:
                mask = SegmentationMask(cand, K)
                if structural_consistency_check(mask, order)[0]:
                    labels = cand
                    break
    else:
        for shrink in (0.7, 0.6, 0.5):
            cand = _tree_layout(order, height, width, rng, shrink)
            if len(np.unique(cand)) == K:
                mask = SegmentationMask(cand, K)
                if structural_consistency_check(mask, order)[0]:
                    labels = cand
                    break
    if labels is None:
        raise OrdsegError(
            f"could not generate a consistent {K}-class scene on a {height}x{width} grid"
        )
    mask = SegmentationMask(labels, K)
    noisy_labels = labels.copy()
    flip = rng.random((height, width)) < noise_rate
    noisy_labels[flip] = rng.integers(0, K, size=int(flip.sum()))
    noisy_mask = SegmentationMask(noisy_labels, K)
    logit_values = confidence * one_hot(noisy_mask, K).probs
    if jitter > 0:
        logit_values = logit_values + jitter * rng.standard_normal(logit_values.shape)
    return SyntheticScene(
        mask=mask,
        noisy_mask=noisy_mask,
        noisy_logits=LogitMap(logit_values),
        noise_rate=float(noise_rate),
        seed=int(seed),
        order=order,
    )


def train_logits(
    scene: SyntheticScene,
    order: ClassOrder,
    config: LossConfig,
    steps: int,
    learning_rate: float = 1.0,
    target: str = "clean",
) -> TrainRun:
    """Plain gradient descent on the scene's logits under the combined loss.

    ``target`` selects the optimization target mask: "clean" for the noise-free
    scene, "noisy" for the fit-the-noise setting.  Dice in the trace is always
    measured against the clean mask.
    """
    if steps < 1:
        raise ValidationError(f"steps must be >= 1, got {steps}")
    if not learning_rate > 0:
        raise ValidationError(f"learning_rate must be > 0, got {learning_rate}")
    if target not in ("clean", "noisy"):
        raise ValidationError(f"target must be 'clean' or 'noisy', got {target!r}")
    target_mask = scene.mask if target == "clean" else scene.noisy_mask
    z = scene.noisy_logits.values.copy()
    trace = []

    def record(report):
        probs = softmax(LogitMap(z))
        pred = argmax_mask(probs)
        trace.append(
            {
                "loss": report.value,
                "dice": dice_macro(pred, scene.mask, order.num_classes)["dice_macro"],
                "cs": contact_surface(pred, order),
                "up": unimodal_pixels(probs, order),
            }
        )

    for step in range(steps):
        report = combined_loss(LogitMap(z), target_mask, order, config, full_breakdown=False)
        if not np.isfinite(report.value):
            raise OrdsegError(
                f"non-finite loss {report.value} at step {step}; trace so far: {trace}"
            )
        record(report)
        z = z - learning_rate * report.gradient
    final_report = combined_loss(LogitMap(z), target_mask, order, config, full_breakdown=False)
    record(final_report)
    final_logits = LogitMap(z)
    final_probs = softmax(final_logits)
    return TrainRun(
        config=config,
        steps=steps,
        learning_rate=float(learning_rate),
        seed=scene.seed,
        target=target,
        trace=tuple(trace),
        final_logits=final_logits,
        final_probs=final_probs,
        final_mask=argmax_mask(final_probs),
    )


TERM_FIELDS = {"o2": "lambda_o2", "csnp": "lambda_csnp", "csdt": "lambda_csdt"}


def config_for_term(term: str, weight: float, base: LossConfig | None = None) -> LossConfig:
    base = base or LossConfig()
    if term == "none":
        return base
    if term not in TERM_FIELDS:
        raise ValidationError(f"unknown term {term!r}; expected one of {sorted(TERM_FIELDS)}")
    kwargs = {
        "delta_margin": base.delta_margin,
        "delta_dt": base.delta_dt,
        "gamma": base.gamma,
        "dt_metric": base.dt_metric,
        TERM_FIELDS[term]: weight,
    }
    return LossConfig(**kwargs)


def grid_search(
    scene: SyntheticScene,
    order: ClassOrder,
    term: str,
    lambdas,
    steps: int,
    learning_rate: float,
    base_config: LossConfig | None = None,
    target: str = "noisy",
) -> list[dict]:
    """One run per weight plus the zero-weight baseline.

    Rows report the final dice / contact-surface / unimodal-pixels values.
    """
    lambdas = list(lambdas)
    if not lambdas:
        raise ValidationError("lambda set must be non-empty")
    rows = []
    for weight in [0.0] + lambdas:
        config = config_for_term(term, weight, base_config)
        run = train_logits(scene, order, config, steps, learning_rate, target=target)
        final = run.trace[-1]
        rows.append(
            {
                "lambda": float(weight),
                "dice": final["dice"],
                "cs": final["cs"],
                "up": final["up"],
                "loss": final["loss"],
            }
        )
    return rows
