"""Single-binary CLI multiplexing all subcommands.

Exit codes: 0 success, 1 validation/runtime failure, 2 usage error.  Every
run writes a JSON manifest alongside its outputs with the resolved
configuration, so reruns are reproducible bit for bit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, io
from .dtransform import METRICS, ActivationMask, distance_transform, saturate
from .encoding import CumulativeMap, consistency_correct, decode, ordinal_encode
from .errors import OrdsegError
from .losses import (
    LossConfig,
    combined_loss,
    cross_entropy,
    csdt_term,
    csnp_term,
    o2_term,
)
from .maps import LogitMap, ProbabilityMap, SegmentationMask, argmax_mask, one_hot, softmax
from .metrics import contact_surface, dice_macro, unimodal_pixels
from .order import ClassOrder, parse_order_spec
from .trainer import config_for_term, generate_scene, grid_search, train_logits


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--lambda-o2", type=float, default=0.0)
    parser.add_argument("--lambda-csnp", type=float, default=0.0)
    parser.add_argument("--lambda-csdt", type=float, default=0.0)
    parser.add_argument("--delta-margin", type=float, default=0.05)
    parser.add_argument("--delta-dt", type=float, default=0.5)
    parser.add_argument("--gamma", type=float, default=10.0)
    parser.add_argument("--dt-metric", choices=METRICS, default="euclidean")


def _config_from_args(args) -> LossConfig:
    return LossConfig(
        lambda_o2=args.lambda_o2,
        lambda_csnp=args.lambda_csnp,
        lambda_csdt=args.lambda_csdt,
        delta_margin=args.delta_margin,
        delta_dt=args.delta_dt,
        gamma=args.gamma,
        dt_metric=args.dt_metric,
    )


def _write_manifest(path, subcommand: str, argv, resolved: dict, outputs, started: float):
    manifest = {
        "tool": "ordseg",
        "version": __version__,
        "subcommand": subcommand,
        "argv": list(argv),
        "resolved": resolved,
        "outputs": [str(p) for p in outputs],
        "duration_s": round(time.monotonic() - started, 6),
    }
    io.write_json(path, manifest)


def _scene_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--classes", type=int, default=4)
    parser.add_argument("--height", type=int, default=64)
    parser.add_argument("--width", type=int, default=64)
    parser.add_argument("--noise", type=float, default=0.3)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--order", default=None, help="order file or chain:<K>")
    parser.add_argument("--confidence", type=float, default=4.0)
    parser.add_argument("--jitter", type=float, default=1.0)


def _scene_from_args(args):
    order = parse_order_spec(args.order) if args.order else ClassOrder.chain(args.classes)
    scene = generate_scene(
        num_classes=order.num_classes,
        height=args.height,
        width=args.width,
        noise_rate=args.noise,
        seed=args.seed,
        order=order,
        confidence=args.confidence,
        jitter=args.jitter,
    )
    return scene, order


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ordseg",
        description="Ordinal semantic segmentation losses, metrics, and toy training.",
    )
    parser.add_argument("--version", action="version", version=f"ordseg {__version__}")
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("loss", help="evaluate the combined loss on a map and target mask")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--logits", help="OPM1 logit map (kind 1)")
    src.add_argument("--probs", help="OPM1 probability map (kind 0)")
    p.add_argument("--target", required=True, help="target PGM mask")
    p.add_argument("--order", required=True, help="order file or chain:<K>")
    _add_config_flags(p)
    p.add_argument("--grad-out", default=None, help="write gradient as OPM1")
    p.add_argument("--out", default=None, help="write the JSON report here as well")

    p = sub.add_parser("dt", help="distance transform of one probability channel")
    p.add_argument("--probs", required=True)
    p.add_argument("--channel", type=int, required=True)
    p.add_argument("--delta-dt", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--dt-metric", choices=METRICS, default="euclidean")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ordenc", help="ordinal encode / decode cumulative maps")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--encode", action="store_true")
    mode.add_argument("--decode", action="store_true")
    p.add_argument("--input", required=True, help="PGM (encode) or OPM1 (decode)")
    p.add_argument("--classes", type=int, default=None, help="class count for encoding")
    p.add_argument("--correct", action="store_true", help="apply consistency correction")
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out", required=True)

    p = sub.add_parser("evaluate", help="metrics over directories of predictions and targets")
    p.add_argument("--pred-dir", required=True)
    p.add_argument("--target-dir", required=True)
    p.add_argument("--order", required=True)
    p.add_argument("--out-csv", required=True)
    p.add_argument("--out-json", required=True)

    p = sub.add_parser("gen-synthetic", help="generate a synthetic ordinal scene")
    _scene_flags(p)
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("train-toy", help="gradient descent on scene logits")
    _scene_flags(p)
    p.add_argument("--term", choices=("none", "o2", "csnp", "csdt"), default="none")
    p.add_argument("--lambda", dest="weight", type=float, default=0.0)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--target", choices=("clean", "noisy"), default="clean")
    p.add_argument("--delta-margin", type=float, default=0.05)
    p.add_argument("--delta-dt", type=float, default=0.5)
    p.add_argument("--gamma", type=float, default=10.0)
    p.add_argument("--dt-metric", choices=METRICS, default="euclidean")
    p.add_argument("--out-prefix", required=True)

    p = sub.add_parser("gridsearch", help="lambda sweep over one regularizer term")
    _scene_flags(p)
    p.add_argument("--term", choices=("o2", "csnp", "csdt"), required=True)
    p.add_argument("--lambdas", default="0.1,1,10,100,1000,10000")
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--lr", type=float, default=1.0)
    p.add_argument("--target", choices=("clean", "noisy"), default="noisy")
    p.add_argument("--out", required=True)
    return parser


def _load_prob_map(path: str) -> ProbabilityMap:
    values, kind = io.read_opm1(path)
    if kind != io.KIND_PROBS:
        raise OrdsegError(f"{path}: expected a probability map (kind 0), got kind {kind}")
    return ProbabilityMap(values)


def _cmd_loss(args, argv) -> int:
    started = time.monotonic()
    order = parse_order_spec(args.order)
    config = _config_from_args(args)
    target = io.read_pgm(args.target, num_classes=order.num_classes)
    if args.logits:
        values, kind = io.read_opm1(args.logits)
        if kind != io.KIND_LOGITS:
            raise OrdsegError(f"{args.logits}: expected logits (kind 1), got kind {kind}")
        report = combined_loss(LogitMap(values), target, order, config)
    else:
        probs = _load_prob_map(args.probs)
        parts = {
            "ce": cross_entropy(probs, target),
            "o2": o2_term(probs, target, order, config.delta_margin),
            "csnp": csnp_term(probs, order),
            "csdt": csdt_term(probs, order, config.delta_dt, config.gamma, config.dt_metric),
        }
        value = (
            parts["ce"].value
            + config.lambda_o2 * parts["o2"].value
            + config.lambda_csnp * parts["csnp"].value
            + config.lambda_csdt * parts["csdt"].value
        )
        gradient = (
            parts["ce"].gradient
            + config.lambda_o2 * parts["o2"].gradient
            + config.lambda_csnp * parts["csnp"].gradient
            + config.lambda_csdt * parts["csdt"].gradient
        )
        from .losses import LossReport

        report = LossReport(float(value), gradient, {k: r.value for k, r in parts.items()})
    payload = {"value": report.value, "terms": report.term_breakdown}
    print(json.dumps(payload, sort_keys=True))
    outputs = []
    if args.grad_out:
        io.write_opm1(args.grad_out, report.gradient, io.KIND_LOGITS)
        outputs.append(args.grad_out)
    if args.out:
        io.write_json(args.out, payload)
        outputs.append(args.out)
    manifest_path = (args.out or args.grad_out or "loss") + ".manifest.json"
    _write_manifest(manifest_path, "loss", argv, _resolved_config(config), outputs, started)
    return 0


def _resolved_config(config: LossConfig) -> dict:
    return {
        "lambda_o2": config.lambda_o2,
        "lambda_csnp": config.lambda_csnp,
        "lambda_csdt": config.lambda_csdt,
        "delta_margin": config.delta_margin,
        "delta_dt": config.delta_dt,
        "gamma": config.gamma,
        "dt_metric": config.dt_metric,
    }


def _cmd_dt(args, argv) -> int:
    started = time.monotonic()
    if not args.gamma > 0:
        raise OrdsegError(f"gamma must be > 0, got {args.gamma}")
    probs = _load_prob_map(args.probs)
    if not 0 <= args.channel < probs.num_classes:
        raise OrdsegError(f"channel {args.channel} outside [0, {probs.num_classes})")
    active = ActivationMask(probs.probs[args.channel] >= args.delta_dt, args.delta_dt)
    dist = saturate(distance_transform(active, args.dt_metric), args.gamma)
    io.write_opm1(args.out, dist.values[None, :, :], io.KIND_LOGITS)
    resolved = {
        "channel": args.channel,
        "delta_dt": args.delta_dt,
        "gamma": args.gamma,
        "dt_metric": args.dt_metric,
    }
    _write_manifest(args.out + ".manifest.json", "dt", argv, resolved, [args.out], started)
    return 0


def _cmd_ordenc(args, argv) -> int:
    started = time.monotonic()
    resolved = {"correct": args.correct, "threshold": args.threshold}
    if args.encode:
        mask = io.read_pgm(args.input, num_classes=args.classes)
        cum = ordinal_encode(mask, args.classes or mask.num_classes)
        io.write_opm1(args.out, cum.values, io.KIND_PROBS)
    else:
        values, kind = io.read_opm1(args.input)
        if kind != io.KIND_PROBS:
            raise OrdsegError(f"{args.input}: expected kind 0 cumulative map, got kind {kind}")
        cum = CumulativeMap(values)
        if args.correct:
            cum = consistency_correct(cum)
        io.write_pgm(args.out, decode(cum, args.threshold))
    _write_manifest(args.out + ".manifest.json", "ordenc", argv, resolved, [args.out], started)
    return 0


def _read_prediction(path: Path, num_classes: int):
    """Returns (mask, probs-or-None)."""
    if path.suffix == ".opm1":
        probs = _load_prob_map(str(path))
        return argmax_mask(probs), probs
    mask = io.read_pgm(str(path), num_classes=num_classes)
    return mask, None


def _cmd_evaluate(args, argv) -> int:
    started = time.monotonic()
    order = parse_order_spec(args.order)
    pred_dir = Path(args.pred_dir)
    target_dir = Path(args.target_dir)
    preds = sorted(
        p for p in pred_dir.iterdir() if p.suffix in (".pgm", ".opm1")
    )
    if not preds:
        raise OrdsegError(f"no .pgm or .opm1 predictions in {pred_dir}")

    def evaluate_one(pred_path: Path):
        target_path = target_dir / (pred_path.stem + ".pgm")
        if not target_path.exists():
            raise OrdsegError(f"missing target mask {target_path}")
        pred_mask, probs = _read_prediction(pred_path, order.num_classes)
        target = io.read_pgm(str(target_path), num_classes=order.num_classes)
        dice = dice_macro(pred_mask, target, order.num_classes)
        if probs is None:
            probs = one_hot(pred_mask, order.num_classes)
        row = {
            "file": pred_path.name,
            "dice_macro": dice["dice_macro"],
            "dice_per_class": dice.dice_per_class,
            "cs": contact_surface(pred_mask, order),
            "up": unimodal_pixels(probs, order),
        }
        return row

    threads = int(os.environ.get("ORDSEG_THREADS", "0") or 0)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate_one, preds))
    else:
        results = [evaluate_one(p) for p in preds]

    K = order.num_classes
    header = ["file", "dice_macro"] + [f"dice_class_{k}" for k in range(K)] + ["cs", "up"]
    rows = []
    for row in results:
        per_class = [
            float(v) if not np.isnan(v) else "" for v in row["dice_per_class"]
        ]
        rows.append([row["file"], row["dice_macro"], *per_class, row["cs"], row["up"]])
    io.write_csv(args.out_csv, header, rows)
    summary = {}
    for name in ("dice_macro", "cs", "up"):
        vals = np.array([row[name] for row in results], dtype=np.float64)
        summary[name] = {"mean": float(vals.mean()), "std": float(vals.std())}
    summary["num_images"] = len(results)
    io.write_json(args.out_json, summary)
    _write_manifest(
        args.out_json + ".manifest.json",
        "evaluate",
        argv,
        {"threads": threads},
        [args.out_csv, args.out_json],
        started,
    )
    return 0


def _cmd_gen_synthetic(args, argv) -> int:
    started = time.monotonic()
    scene, order = _scene_from_args(args)
    prefix = args.out_prefix
    outputs = [f"{prefix}.clean.pgm", f"{prefix}.noisy.pgm", f"{prefix}.logits.opm1"]
    io.write_pgm(outputs[0], scene.mask)
    io.write_pgm(outputs[1], scene.noisy_mask)
    io.write_opm1(outputs[2], scene.noisy_logits.values, io.KIND_LOGITS)
    resolved = {
        "classes": order.num_classes,
        "height": args.height,
        "width": args.width,
        "noise": args.noise,
        "seed": args.seed,
        "confidence": args.confidence,
        "jitter": args.jitter,
    }
    _write_manifest(f"{prefix}.manifest.json", "gen-synthetic", argv, resolved, outputs, started)
    return 0


def _cmd_train_toy(args, argv) -> int:
    started = time.monotonic()
    scene, order = _scene_from_args(args)
    base = LossConfig(
        delta_margin=args.delta_margin,
        delta_dt=args.delta_dt,
        gamma=args.gamma,
        dt_metric=args.dt_metric,
    )
    config = config_for_term(args.term, args.weight, base)
    run = train_logits(scene, order, config, args.steps, args.lr, target=args.target)
    prefix = args.out_prefix
    trace_rows = [
        [step, rec["loss"], rec["dice"], rec["cs"], rec["up"]]
        for step, rec in enumerate(run.trace)
    ]
    outputs = [f"{prefix}.trace.csv", f"{prefix}.final.pgm"]
    io.write_csv(outputs[0], ["step", "loss", "dice", "cs", "up"], trace_rows)
    io.write_pgm(outputs[1], run.final_mask)
    resolved = dict(
        _resolved_config(config),
        term=args.term,
        weight=args.weight,
        steps=args.steps,
        lr=args.lr,
        seed=args.seed,
        target=args.target,
    )
    _write_manifest(f"{prefix}.manifest.json", "train-toy", argv, resolved, outputs, started)
    return 0


def _cmd_gridsearch(args, argv) -> int:
    started = time.monotonic()
    scene, order = _scene_from_args(args)
    lambdas = [float(tok) for tok in args.lambdas.split(",") if tok.strip()]
    rows = grid_search(
        scene, order, args.term, lambdas, args.steps, args.lr, target=args.target
    )
    io.write_csv(
        args.out,
        ["lambda", "dice", "cs", "up", "loss"],
        [[r["lambda"], r["dice"], r["cs"], r["up"], r["loss"]] for r in rows],
    )
    resolved = {
        "term": args.term,
        "lambdas": lambdas,
        "steps": args.steps,
        "lr": args.lr,
        "seed": args.seed,
        "target": args.target,
    }
    _write_manifest(args.out + ".manifest.json", "gridsearch", argv, resolved, [args.out], started)
    return 0


_COMMANDS = {
    "loss": _cmd_loss,
    "dt": _cmd_dt,
    "ordenc": _cmd_ordenc,
    "evaluate": _cmd_evaluate,
    "gen-synthetic": _cmd_gen_synthetic,
    "train-toy": _cmd_train_toy,
    "gridsearch": _cmd_gridsearch,
}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.subcommand](args, argv)
    except (OrdsegError, OSError) as exc:
        print(f"ordseg: error: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:  # console_scripts target
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
