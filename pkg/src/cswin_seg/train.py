"""Training loop: shuffled minibatches, flip/rotation augmentation, the
combined objective, momentum SGD, loss/metric logging.

Gradients of the per-sample losses are accumulated and scaled by 1/batch,
so a step uses the mean batch gradient.  Everything (shuffling, transform
choice) draws from one seeded generator; two runs with the same seed and
data produce bitwise-identical parameters.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .data import SegmentationSample
from .errors import ConfigError, DataError, NumericError
from .losses import LossConfig, cross_entropy_loss, dice_loss
from .metrics import MetricsReport, evaluate_masks
from .network import Model
from .optim import SGD, OptimizerConfig
from .tensor import Tape, Tensor, backward

TRANSFORMS = ("identity", "hflip", "vflip", "rot90", "rot180", "rot270")


def apply_transform(arr: np.ndarray, name: str) -> np.ndarray:
    """Apply one named transform to [H,W] or [H,W,C]; rotations need H == W."""
    if name == "identity":
        return arr
    if name == "hflip":
        return np.ascontiguousarray(arr[:, ::-1])
    if name == "vflip":
        return np.ascontiguousarray(arr[::-1, :])
    if name.startswith("rot"):
        if arr.shape[0] != arr.shape[1]:
            raise ConfigError(f"rotation of non-square array {arr.shape}")
        k = {"rot90": 1, "rot180": 2, "rot270": 3}[name]
        return np.ascontiguousarray(np.rot90(arr, k))
    raise ConfigError(f"unknown transform {name!r}")


def augment(sample: SegmentationSample, rng: np.random.Generator) -> SegmentationSample:
    """Random flip / right-angle rotation, identical for image and mask."""
    name = TRANSFORMS[int(rng.integers(len(TRANSFORMS)))]
    if name == "identity":
        return sample
    return SegmentationSample(
        image=apply_transform(sample.image, name),
        mask=apply_transform(sample.mask, name),
        id=sample.id,
    )


@dataclass
class TrainResult:
    # one row per iteration: (iteration, total, dice, cross_entropy, lr)
    losses: list[tuple[int, float, float, float, float]] = field(default_factory=list)
    # (iteration, MetricsReport) at every eval interval
    metrics: list[tuple[int, MetricsReport]] = field(default_factory=list)
    # state of the shuffling/augmentation rng when training finished
    rng_state: dict | None = None


def predict_mask(model: Model, image: np.ndarray) -> np.ndarray:
    return model.forward(Tensor(image)).data.argmax(axis=-1)


def evaluate_model(model: Model, samples: list[SegmentationSample], num_classes: int) -> MetricsReport:
    pairs = [(predict_mask(model, s.image), s.mask) for s in samples]
    return evaluate_masks(pairs, num_classes)


def train(
    model: Model,
    samples: list[SegmentationSample],
    opt_cfg: OptimizerConfig,
    loss_cfg: LossConfig,
    *,
    augment_enabled: bool = True,
    val_samples: Optional[list[SegmentationSample]] = None,
    eval_interval: int = 0,
    callback: Optional[Callable[[int, float], None]] = None,
) -> tuple[SGD, TrainResult]:
    """Run opt_cfg.max_iterations of SGD; returns the optimizer (for its
    momentum state) and the loss / metrics history."""
    if not samples:
        raise DataError("training set is empty")
    optimizer = SGD(model.named_parameters(), opt_cfg)
    rng = np.random.default_rng(opt_cfg.seed)
    result = TrainResult(losses=[])

    order: list[int] = []
    for iteration in range(opt_cfg.max_iterations):
        batch = []
        for _ in range(opt_cfg.batch_size):
            if not order:
                order = list(rng.permutation(len(samples)))
            batch.append(samples[order.pop()])

        optimizer.zero_grad()
        tot_l = dice_l = ce_l = 0.0
        inv_batch = 1.0 / len(batch)
        for sample in batch:
            if augment_enabled:
                sample = augment(sample, rng)
            with Tape() as tape:
                logits = model.forward(Tensor(sample.image))
                dice = dice_loss(logits, sample.mask, loss_cfg.dice_smooth) if loss_cfg.alpha else None
                ce = cross_entropy_loss(logits, sample.mask) if loss_cfg.beta else None
                loss = None
                if dice is not None:
                    loss = loss_cfg.alpha * dice
                if ce is not None:
                    loss = loss_cfg.beta * ce if loss is None else loss + loss_cfg.beta * ce
                scaled = loss * inv_batch
            if not np.isfinite(scaled.item()):
                raise NumericError(f"non-finite loss at iteration {iteration}")
            backward(scaled, tape)
            tot_l += loss.item() * inv_batch
            dice_l += dice.item() * inv_batch if dice is not None else 0.0
            ce_l += ce.item() * inv_batch if ce is not None else 0.0

        lr = opt_cfg.lr_at(iteration)
        optimizer.step(lr)
        result.losses.append((iteration, tot_l, dice_l, ce_l, lr))
        if callback is not None:
            callback(iteration, tot_l)
        if eval_interval and val_samples and (iteration + 1) % eval_interval == 0:
            result.metrics.append((iteration, evaluate_model(model, val_samples, model.config.num_classes)))
    result.rng_state = rng.bit_generator.state
    return optimizer, result


def losses_to_csv(rows: list[tuple[int, float, float, float, float]]) -> str:
    out = ["iteration,loss,dice_loss,cross_entropy_loss,lr"]
    for it, total, dice, ce, lr in rows:
        out.append(f"{it},{total:.8f},{dice:.8f},{ce:.8f},{lr:.8f}")
    return "\n".join(out) + "\n"


def metrics_to_csv(report: MetricsReport) -> str:
    out = ["class,dsc,hd,hd95"]
    for row in report.rows():
        out.append(f"{row['class']},{row['dsc']:.6f},{row['hd']:.6f},{row['hd95']:.6f}")
    out.append(f"se,{report.se:.6f},,")
    out.append(f"sp,{report.sp:.6f},,")
    out.append(f"acc,{report.acc:.6f},,")
    return "\n".join(out) + "\n"
