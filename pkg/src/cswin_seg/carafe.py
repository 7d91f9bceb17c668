"""Content-aware reassembly upsampling.

Each output pixel gets its own k_up x k_up kernel, predicted from the
input features (1x1 channel compressor, then a context-encoder conv whose
sigma^2 * k_up^2 output channels are pixel-shuffled so every upsampled
position owns one kernel).  Kernels are softmax-normalized, then the
output pixel is the kernel-weighted sum of the k_up x k_up neighborhood
around its source pixel (i, j) = (floor(i'/sigma), floor(j'/sigma)).

Out-of-bounds neighbors contribute zero, in the encoder conv and in the
reassembly alike.  Channel count is preserved; any channel change is the
caller's business (the network follows each upsample with a 1x1 conv).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import Tensor, conv2d, mul, patches, pixel_shuffle, reshape, softmax, tsum, upsample_nearest


@dataclass
class UpsampleConfig:
    sigma: int
    k_up: int = 5
    k_encoder: int = 3
    c_mid: int = 64

    def __post_init__(self):
        if self.sigma < 1:
            raise ConfigError(f"upsample ratio must be >= 1, got {self.sigma}")
        if self.k_up % 2 == 0 or self.k_up < 1:
            raise ConfigError(f"reassembly kernel size must be odd, got {self.k_up}")
        if self.k_encoder % 2 == 0 or self.k_encoder < 1:
            raise ConfigError(f"encoder kernel size must be odd, got {self.k_encoder}")
        if self.c_mid < 1:
            raise ConfigError(f"compressed channel count must be positive, got {self.c_mid}")

    @property
    def kernel_area(self) -> int:
        return self.k_up * self.k_up


@dataclass
class ReassemblyKernelField:
    """Normalized per-output-pixel kernels, shape [sigma*H, sigma*W, k_up^2].

    Kernel slot (n+r)*k_up + (m+r) weighs the source neighbor at row offset
    n, column offset m (r = k_up//2); row-major, frozen for checkpoints.
    """

    weights: Tensor


@dataclass
class KernelPredictorParams:
    comp_w: Tensor  # 1x1 conv, C -> c_mid
    comp_b: Tensor
    enc_w: Tensor  # k_enc x k_enc conv, c_mid -> sigma^2 * k_up^2
    enc_b: Tensor

    @staticmethod
    def create(rng: np.random.Generator, channels: int, config: UpsampleConfig, dtype: str = "f32") -> "KernelPredictorParams":
        from .initializers import conv_trunc_normal

        out_ch = config.sigma**2 * config.kernel_area
        return KernelPredictorParams(
            comp_w=conv_trunc_normal(rng, (1, 1, channels, config.c_mid), dtype),
            comp_b=Tensor.zeros((config.c_mid,), dtype, requires_grad=True),
            enc_w=conv_trunc_normal(rng, (config.k_encoder, config.k_encoder, config.c_mid, out_ch), dtype),
            enc_b=Tensor.zeros((out_ch,), dtype, requires_grad=True),
        )

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        yield f"{prefix}.comp.w", self.comp_w
        yield f"{prefix}.comp.b", self.comp_b
        yield f"{prefix}.enc.w", self.enc_w
        yield f"{prefix}.enc.b", self.enc_b


def source_index(pos: tuple[int, int], sigma: int, extents: tuple[int, int] | None = None) -> tuple[int, int]:
    """Map an upsampled pixel (i', j') to its source pixel (floor division)."""
    ip, jp = pos
    if ip < 0 or jp < 0:
        raise DimensionError(f"negative output position {pos}")
    if extents is not None:
        h, w = extents
        if ip >= sigma * h or jp >= sigma * w:
            raise DimensionError(f"output position {pos} outside {sigma}x upsampled {h}x{w} grid")
    return ip // sigma, jp // sigma


def predict_kernels(x: Tensor, params: KernelPredictorParams, config: UpsampleConfig) -> ReassemblyKernelField:
    """Compress, encode, shuffle to one kernel per output pixel, normalize."""
    if x.ndim != 3:
        raise DimensionError(f"predict_kernels expects [H,W,C], got {x.shape}")
    if params.comp_w.shape[2] != x.shape[2]:
        raise DimensionError(f"compressor expects C={params.comp_w.shape[2]}, input has {x.shape[2]}")
    compressed = conv2d(x, params.comp_w, params.comp_b)
    logits = conv2d(compressed, params.enc_w, params.enc_b, padding=config.k_encoder // 2)
    field = pixel_shuffle(logits, config.sigma, config.kernel_area)
    return ReassemblyKernelField(softmax(field, axis=-1))


def reassemble(x: Tensor, field: ReassemblyKernelField, config: UpsampleConfig) -> Tensor:
    """Weighted neighborhood sums: [H,W,C] + kernels -> [sigma*H, sigma*W, C]."""
    h, w, c = x.shape
    sigma, k = config.sigma, config.k_up
    expect = (sigma * h, sigma * w, config.kernel_area)
    if field.weights.shape != expect:
        raise DimensionError(f"kernel field shape {field.weights.shape} != {expect}")
    hood = patches(x, k, k, stride=1, padding=k // 2)  # [H, W, k^2, C]
    hood_up = upsample_nearest(hood, sigma)  # [sH, sW, k^2, C]
    weighted = mul(hood_up, reshape(field.weights, (sigma * h, sigma * w, config.kernel_area, 1)))
    return tsum(weighted, axis=2)


def carafe_upsample(x: Tensor, params: KernelPredictorParams, config: UpsampleConfig) -> Tensor:
    return reassemble(x, predict_kernels(x, params, config), config)
