"""Cross-shaped-window self-attention and its transformer block.

The feature map is cut into non-overlapping stripes of width ``sw``; half
of the attention heads attend inside horizontal stripes (sw x W tokens),
the other half inside vertical stripes (H x sw tokens).  Head outputs are
concatenated channel-wise and fused by a square output projection, so the
block keeps its (H, W, C) shape.

Optionally each head adds a locally-enhanced positional term: a 3x3
depthwise convolution of its value map, applied inside the stripe.  With
it disabled the attention carries no positional information and is
permutation-equivariant within a stripe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigError, DimensionError
from .tensor import (
    Tensor,
    add,
    concat,
    depthwise_conv2d,
    gelu,
    layer_norm,
    linear,
    matmul,
    permute,
    reshape,
    softmax,
)

HORIZONTAL = "horizontal"
VERTICAL = "vertical"


@dataclass
class AttentionConfig:
    """Shape contract for one cross-window attention layer."""

    heads: int
    sw: int
    channels: int
    lepe_enabled: bool = False

    def __post_init__(self):
        if self.heads < 2 or self.heads % 2:
            raise ConfigError(f"head count must be even and >= 2, got {self.heads}")
        if self.channels % self.heads:
            raise ConfigError(f"channels {self.channels} not divisible by {self.heads} heads")
        if self.sw < 1:
            raise ConfigError(f"stripe width must be positive, got {self.sw}")

    @property
    def head_dim(self) -> int:
        return self.channels // self.heads


@dataclass
class StripePartition:
    """Bookkeeping for one stripe split: index ranges along the cut axis."""

    direction: str
    sw: int
    count: int
    stripes: list[tuple[int, int]]


def partition(x: Tensor, direction: str, sw: int) -> tuple[StripePartition, list[Tensor]]:
    """Cut [H,W,C] into stripes of width sw rows (horizontal) or columns (vertical).

    Divisibility is a hard requirement; there is no implicit padding.
    """
    if x.ndim != 3:
        raise DimensionError(f"partition expects [H,W,C], got {x.shape}")
    h, w, _ = x.shape
    extent = h if direction == HORIZONTAL else w
    if direction not in (HORIZONTAL, VERTICAL):
        raise ConfigError(f"unknown stripe direction {direction!r}")
    if extent % sw:
        raise ConfigError(f"stripe width {sw} does not divide extent {extent} ({direction})")
    count = extent // sw
    part = StripePartition(direction, sw, count, [(i * sw, (i + 1) * sw) for i in range(count)])
    if direction == HORIZONTAL:
        stripes = [Tensor(x.data[a:b, :, :]) for a, b in part.stripes]
    else:
        stripes = [Tensor(x.data[:, a:b, :]) for a, b in part.stripes]
    return part, stripes


def reassemble(part: StripePartition, stripes: list[Tensor]) -> Tensor:
    axis = 0 if part.direction == HORIZONTAL else 1
    return concat(stripes, axis=axis)


def stripe_attention(
    stripe: Tensor,
    wq: Tensor,
    wk: Tensor,
    wv: Tensor,
    lepe: Optional[Tensor] = None,
) -> Tensor:
    """Scaled dot-product attention over every token of one stripe.

    stripe is a [rows, cols, C] map; tokens are flattened row-major.  The
    output keeps the stripe geometry with d = wq.shape[1] channels.
    """
    rows, cols, c = stripe.shape
    d = wq.shape[1]
    if wq.shape != (c, d) or wk.shape != (c, d) or wv.shape != (c, d):
        raise DimensionError(f"projection shapes {wq.shape}/{wk.shape}/{wv.shape} do not match C={c}")
    tok = reshape(stripe, (rows * cols, c))
    q = matmul(tok, wq)
    k = matmul(tok, wk)
    v = matmul(tok, wv)
    scores = matmul(q, permute(k, (1, 0))) * (1.0 / np.sqrt(d))
    out = matmul(softmax(scores, axis=-1), v)
    out = reshape(out, (rows, cols, d))
    if lepe is not None:
        out = add(out, depthwise_conv2d(reshape(v, (rows, cols, d)), lepe, padding=lepe.shape[0] // 2))
    return out


def _stripe_batch_attention(xb: Tensor, wq: Tensor, wk: Tensor, wv: Tensor, d: int) -> Tensor:
    # xb: [stripes, tokens, C] -> [stripes, tokens, d], all stripes at once
    q = matmul(xb, wq)
    k = matmul(xb, wk)
    v = matmul(xb, wv)
    scores = matmul(q, permute(k, (0, 2, 1))) * (1.0 / np.sqrt(d))
    return matmul(softmax(scores, axis=-1), v), v


def _lepe_per_stripe(v: Tensor, kernel: Tensor, stripe_shape: tuple[int, int], transposed: bool) -> Tensor:
    # v: [stripes, tokens, d] in batch layout; convolve each stripe in its
    # image-plane geometry and return the same batch layout.
    from .tensor import split

    m = v.shape[0]
    rows, cols = stripe_shape
    d = v.shape[2]
    outs = []
    for s in split(v, [1] * m, axis=0):
        geom = reshape(s, (rows, cols, d))
        if transposed:
            geom = permute(geom, (1, 0, 2))
        conv = depthwise_conv2d(geom, kernel, padding=kernel.shape[0] // 2)
        if transposed:
            conv = permute(conv, (1, 0, 2))
        outs.append(reshape(conv, (1, rows * cols, d)))
    return concat(outs, axis=0)


def h_attention(x: Tensor, params: "CSWinBlockParams", config: AttentionConfig) -> Tensor:
    """Horizontal-stripe attention for the first N/2 heads -> [H,W,C/2]."""
    return _group_attention(x, params, config, HORIZONTAL)


def v_attention(x: Tensor, params: "CSWinBlockParams", config: AttentionConfig) -> Tensor:
    """Vertical-stripe attention for the last N/2 heads -> [H,W,C/2]."""
    return _group_attention(x, params, config, VERTICAL)


def _group_attention(x: Tensor, params: "CSWinBlockParams", config: AttentionConfig, direction: str) -> Tensor:
    h, w, c = x.shape
    sw, d = config.sw, config.head_dim
    half = config.heads // 2
    extent = h if direction == HORIZONTAL else w
    if extent % sw:
        raise ConfigError(f"stripe width {sw} does not divide {direction} extent {extent}")

    if direction == HORIZONTAL:
        xb = reshape(x, (h // sw, sw * w, c))
        head_range = range(half)
        stripe_shape = (sw, w)
    else:
        xb = reshape(permute(x, (1, 0, 2)), (w // sw, sw * h, c))
        head_range = range(half, config.heads)
        stripe_shape = (sw, h)  # transposed plane

    outs = []
    for n in head_range:
        y, v = _stripe_batch_attention(xb, params.wq[n], params.wk[n], params.wv[n], d)
        if config.lepe_enabled:
            y = add(y, _lepe_per_stripe(v, params.lepe[n], stripe_shape, transposed=direction == VERTICAL))
        if direction == HORIZONTAL:
            outs.append(reshape(y, (h, w, d)))
        else:
            y = reshape(y, (w // sw, sw, h, d))
            outs.append(reshape(permute(y, (2, 0, 1, 3)), (h, w, d)))
    return concat(outs, axis=-1)


def cswin_attention(x: Tensor, params: "CSWinBlockParams", config: AttentionConfig) -> Tensor:
    """Two-group stripe attention with output projection; (H,W,C) -> (H,W,C)."""
    h, w, c = x.shape
    if c != config.channels:
        raise DimensionError(f"input has {c} channels, config says {config.channels}")
    grouped = concat([h_attention(x, params, config), v_attention(x, params, config)], axis=-1)
    out = matmul(reshape(grouped, (h * w, c)), params.wo)
    return reshape(out, (h, w, c))


def cswin_block(x: Tensor, params: "CSWinBlockParams", config: AttentionConfig) -> Tensor:
    """Pre-norm transformer block: attention residual, then MLP residual."""
    h, w, c = x.shape
    attn = cswin_attention(layer_norm(x, params.ln1_g, params.ln1_b), params, config)
    x = add(x, attn)
    y = layer_norm(x, params.ln2_g, params.ln2_b)
    y = reshape(y, (h * w, c))
    y = linear(gelu(linear(y, params.mlp_w1, params.mlp_b1)), params.mlp_w2, params.mlp_b2)
    return add(x, reshape(y, (h, w, c)))


@dataclass
class CSWinBlockParams:
    """Learnable state of one block; per-head Q/K/V projections, shared output
    projection, two layer norms and the expansion MLP."""

    wq: list[Tensor]
    wk: list[Tensor]
    wv: list[Tensor]
    wo: Tensor
    ln1_g: Tensor
    ln1_b: Tensor
    ln2_g: Tensor
    ln2_b: Tensor
    mlp_w1: Tensor
    mlp_b1: Tensor
    mlp_w2: Tensor
    mlp_b2: Tensor
    lepe: list[Tensor] = field(default_factory=list)

    @staticmethod
    def create(
        rng: np.random.Generator,
        config: AttentionConfig,
        mlp_ratio: int = 4,
        dtype: str = "f32",
    ) -> "CSWinBlockParams":
        from .initializers import trunc_normal

        c, n, d = config.channels, config.heads, config.head_dim
        hidden = mlp_ratio * c
        proj = lambda *shape: trunc_normal(rng, shape, 0.02, dtype)
        ones = lambda *shape: Tensor.ones(shape, dtype, requires_grad=True)
        zeros = lambda *shape: Tensor.zeros(shape, dtype, requires_grad=True)
        return CSWinBlockParams(
            wq=[proj(c, d) for _ in range(n)],
            wk=[proj(c, d) for _ in range(n)],
            wv=[proj(c, d) for _ in range(n)],
            wo=proj(c, c),
            ln1_g=ones(c),
            ln1_b=zeros(c),
            ln2_g=ones(c),
            ln2_b=zeros(c),
            mlp_w1=proj(c, hidden),
            mlp_b1=zeros(hidden),
            mlp_w2=proj(hidden, c),
            mlp_b2=zeros(c),
            lepe=[proj(3, 3, d) for _ in range(n)] if config.lepe_enabled else [],
        )

    def named(self, prefix: str) -> Iterator[tuple[str, Tensor]]:
        for i, t in enumerate(self.wq):
            yield f"{prefix}.h{i}.wq", t
        for i, t in enumerate(self.wk):
            yield f"{prefix}.h{i}.wk", t
        for i, t in enumerate(self.wv):
            yield f"{prefix}.h{i}.wv", t
        yield f"{prefix}.wo", self.wo
        yield f"{prefix}.ln1.g", self.ln1_g
        yield f"{prefix}.ln1.b", self.ln1_b
        yield f"{prefix}.ln2.g", self.ln2_g
        yield f"{prefix}.ln2.b", self.ln2_b
        yield f"{prefix}.mlp.w1", self.mlp_w1
        yield f"{prefix}.mlp.b1", self.mlp_b1
        yield f"{prefix}.mlp.w2", self.mlp_w2
        yield f"{prefix}.mlp.b2", self.mlp_b2
        for i, t in enumerate(self.lepe):
            yield f"{prefix}.h{i}.lepe", t
