"""Command-line surface.

Subcommands: synth (dataset generation), train, eval, predict, gradcheck
(finite-difference suite), count (parameters/FLOPs vs the reference
figures), bench (stripe vs dense attention cost).  Every subcommand is a
pure function of its flags plus seeds; exit code 0 means success, 1 a
domain error (bad config, bad file, numeric failure), 2 a usage error.
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

import numpy as np

from . import complexity
from .attention import AttentionConfig, CSWinBlockParams, cswin_attention
from .checkpoint import restore_model, save_checkpoint, snapshot
from .data import class_color, load_dataset, read_ppm, synth_generate, write_pgm, write_ppm
from .errors import (
    ConfigError,
    ContractError,
    DataError,
    DimensionError,
    FormatError,
    NumericError,
)
from .fdsuite import run_suite
from .losses import LossConfig
from .network import Model, NetworkConfig, default_config, tiny_config
from .optim import OptimizerConfig
from .tensor import Tensor
from .train import evaluate_model, losses_to_csv, metrics_to_csv, train

_ERRORS = (ConfigError, ContractError, DataError, DimensionError, FormatError, NumericError, OSError)


def resolve_config(spec: str) -> NetworkConfig:
    if spec == "default":
        return default_config()
    if spec == "tiny":
        return tiny_config()
    return NetworkConfig.load(spec)


def cmd_synth(args) -> int:
    manifest = synth_generate(
        args.out, n=args.n, size=args.size, num_classes=args.classes, seed=args.seed,
        val=args.val, test=args.test,
    )
    print(f"wrote {len(manifest['samples'])} samples ({args.size}x{args.size}, {args.classes} classes) to {args.out}")
    return 0


def cmd_train(args) -> int:
    samples, manifest = load_dataset(args.data, "train")
    config = resolve_config(args.config)
    if config.input_size != manifest["size"]:
        raise ConfigError(f"config input size {config.input_size} != dataset size {manifest['size']}")
    if config.num_classes != manifest["num_classes"]:
        raise ConfigError(f"config classes {config.num_classes} != dataset classes {manifest['num_classes']}")
    try:
        val_samples, _ = load_dataset(args.data, "val")
    except DataError:
        val_samples = None

    opt_cfg = OptimizerConfig(
        lr=args.lr, momentum=args.momentum, weight_decay=args.weight_decay,
        batch_size=args.batch, max_iterations=args.iters, seed=args.seed,
        lr_schedule=args.lr_schedule,
    )
    loss_cfg = LossConfig(alpha=args.alpha, beta=args.beta)
    model = Model.create(config, seed=args.seed)

    every = max(1, args.iters // 10)

    def progress(it, loss):
        if it % every == 0 or it == args.iters - 1:
            print(f"iter {it:5d}  loss {loss:.4f}")

    optimizer, result = train(
        model, samples, opt_cfg, loss_cfg,
        augment_enabled=not args.no_augment,
        val_samples=val_samples, eval_interval=args.eval_interval,
        callback=progress,
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "loss.csv").write_text(losses_to_csv(result.losses))
    ckpt = snapshot(model, optimizer=optimizer, iteration=args.iters)
    ckpt.rng_state = result.rng_state
    save_checkpoint(out / "checkpoint.ckpt", ckpt)
    if result.metrics:
        (out / "val_metrics.csv").write_text(metrics_to_csv(result.metrics[-1][1]))
    print(f"final loss {result.losses[-1][1]:.4f}; checkpoint and curves in {out}")
    return 0


def cmd_eval(args) -> int:
    model, _ = restore_model(args.checkpoint)
    samples, manifest = load_dataset(args.data, args.split)
    report = evaluate_model(model, samples, manifest["num_classes"])
    print(report.table())
    if args.out:
        Path(args.out).write_text(metrics_to_csv(report))
        print(f"report written to {args.out}")
    return 0


def cmd_predict(args) -> int:
    model, _ = restore_model(args.checkpoint)
    image_u8 = read_ppm(args.image)
    image = image_u8.astype(np.float32) / 255.0
    mask = model.forward(Tensor(image)).data.argmax(axis=-1).astype(np.uint8)
    write_pgm(args.out, mask)
    print(f"mask written to {args.out}")
    if args.overlay:
        overlay = image.copy()
        for c in range(1, model.config.num_classes):
            sel = mask == c
            overlay[sel] = 0.5 * overlay[sel] + 0.5 * class_color(c)
        write_ppm(args.overlay, overlay)
        print(f"overlay written to {args.overlay}")
    return 0


def cmd_gradcheck(args) -> int:
    results = run_suite(full=args.full, tol=args.tol, seed=args.seed)
    failed = 0
    for r in results:
        status = "ok  " if r.ok else "FAIL"
        print(f"{status} {r.name:<32} max rel err {r.max_err:.3e}")
        failed += not r.ok
    print(f"{len(results) - failed}/{len(results)} gradient checks passed")
    return 1 if failed else 0


def cmd_count(args) -> int:
    cfg = resolve_config(args.config)
    params = complexity.count_params(cfg)
    flops = complexity.count_flops(cfg)
    ok, p_ratio, f_ratio = complexity.within_reference(cfg)
    print(f"parameters: {params:>14,}  ({params / 1e6:.2f} M, x{p_ratio:.3f} of reference {complexity.REFERENCE_PARAMS / 1e6:.2f} M)")
    print(f"flops:      {flops:>14,}  ({flops / 1e9:.2f} G, x{f_ratio:.3f} of reference {complexity.REFERENCE_FLOPS / 1e9:.2f} G)")
    for name, value in sorted(complexity.params_breakdown(cfg).items()):
        print(f"  params/{name:<16} {value:>12,}")
    if args.strict and not ok:
        print(f"outside +-{complexity.CALIBRATION_TOLERANCE:.0%} calibration tolerance", file=sys.stderr)
        return 1
    return 0


def _parse_bench_shape(text: str) -> tuple[int, int, int, int, int]:
    try:
        h, w, c, n, sw = (int(p) for p in text.split("x"))
        return h, w, c, n, sw
    except ValueError as e:
        raise ConfigError(f"bench shape must be HxWxCxHEADSxSW, got {text!r}") from e


def _time_attention(x, params, config, repeats=3) -> float:
    best = float("inf")
    for _ in range(repeats + 1):  # first pass warms caches, then keep the best
        t0 = time.perf_counter()
        cswin_attention(x, params, config)
        best = min(best, time.perf_counter() - t0)
    return best * 1e3


def cmd_bench(args) -> int:
    shapes = [_parse_bench_shape(s) for s in args.shapes] if args.shapes else [
        (16, 16, 32, 4, 2), (32, 32, 32, 4, 2), (32, 32, 32, 4, 4), (32, 32, 64, 8, 8), (64, 64, 16, 2, 4),
    ]
    rng = np.random.default_rng(args.seed)
    rows = ["h,w,c,heads,sw,stripe_flops,dense_flops,stripe_ms,dense_ms"]
    print(f"{'shape':>20} {'stripe GF':>10} {'dense GF':>10} {'stripe ms':>10} {'dense ms':>10}")
    for h, w, c, n, sw in shapes:
        if h % sw or w % sw or c % n or n % 2:
            raise ConfigError(f"invalid bench shape {h}x{w}x{c}x{n}x{sw}")
        proj = complexity.attention_projection_macs(h, w, c)
        stripe_fl = proj + complexity.stripe_attention_macs(h, w, c, sw)
        dense_fl = proj + complexity.dense_attention_macs(h, w, c)
        x = Tensor(rng.uniform(-1, 1, (h, w, c)).astype(np.float32))
        cfg_stripe = AttentionConfig(heads=n, sw=sw, channels=c)
        params = CSWinBlockParams.create(rng, cfg_stripe, dtype="f32")
        stripe_ms = _time_attention(x, params, cfg_stripe)
        # dense baseline: the degenerate full-map stripe (sw = H = W needs a
        # square map; bench shapes keep H == W)
        cfg_dense = AttentionConfig(heads=n, sw=h, channels=c)
        dense_ms = _time_attention(x, params, cfg_dense) if h == w else float("nan")
        rows.append(f"{h},{w},{c},{n},{sw},{stripe_fl},{dense_fl},{stripe_ms:.3f},{dense_ms:.3f}")
        print(f"{f'{h}x{w}x{c} n={n} sw={sw}':>20} {stripe_fl / 1e9:>10.4f} {dense_fl / 1e9:>10.4f} {stripe_ms:>10.2f} {dense_ms:>10.2f}")
    if args.out:
        Path(args.out).write_text("\n".join(rows) + "\n")
        print(f"csv written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cswin-seg", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic shape-segmentation dataset")
    s.add_argument("--out", required=True)
    s.add_argument("--n", type=int, default=8)
    s.add_argument("--size", type=int, default=64)
    s.add_argument("--classes", type=int, default=4)
    s.add_argument("--seed", type=int, default=7)
    s.add_argument("--val", type=int, default=0)
    s.add_argument("--test", type=int, default=0)
    s.set_defaults(fn=cmd_synth)

    s = sub.add_parser("train", help="train on a dataset and write checkpoint + curves")
    s.add_argument("--data", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--config", default="tiny", help="'default', 'tiny' or a JSON path")
    s.add_argument("--iters", type=int, default=300)
    s.add_argument("--batch", type=int, default=4)
    s.add_argument("--lr", type=float, default=0.05)
    s.add_argument("--momentum", type=float, default=0.9)
    s.add_argument("--weight-decay", type=float, default=1e-4)
    s.add_argument("--alpha", type=float, default=0.4)
    s.add_argument("--beta", type=float, default=0.6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--lr-schedule", choices=("constant", "poly"), default="constant")
    s.add_argument("--no-augment", action="store_true")
    s.add_argument("--eval-interval", type=int, default=0)
    s.set_defaults(fn=cmd_train)

    s = sub.add_parser("eval", help="evaluate a checkpoint on a dataset split")
    s.add_argument("--data", required=True)
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--split", default="test")
    s.add_argument("--out", default=None)
    s.set_defaults(fn=cmd_eval)

    s = sub.add_parser("predict", help="segment one PPM image")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--image", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--overlay", default=None)
    s.set_defaults(fn=cmd_predict)

    s = sub.add_parser("gradcheck", help="finite-difference gradient suite")
    s.add_argument("--dtype", choices=("f64",), default="f64", help="checks are only meaningful in f64")
    s.add_argument("--full", action="store_true", help="include the end-to-end tiny-network check")
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_gradcheck)

    s = sub.add_parser("count", help="analytic parameter / FLOP counts vs reference")
    s.add_argument("--config", default="default")
    s.add_argument("--strict", action="store_true", help="nonzero exit outside calibration tolerance")
    s.set_defaults(fn=cmd_count)

    s = sub.add_parser("bench", help="stripe vs dense attention, analytic FLOPs and wall time")
    s.add_argument("--shapes", nargs="*", help="HxWxCxHEADSxSW entries")
    s.add_argument("--out", default=None)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except _ERRORS as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
