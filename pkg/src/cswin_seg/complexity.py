"""Analytic parameter and FLOP counting.

Counts are exact functions of the configuration: parameters mirror the
model constructor one for one (a test enumerates the built model to prove
it), FLOPs count one multiply-accumulate as one FLOP, the convention the
published complexity figures for this family of models use.  Only matrix
products and convolutions are counted; normalization, softmax and
activations are ignored.

Reference targets for the default 224 configuration: 23.57M parameters,
4.72G FLOPs.
"""

from __future__ import annotations

from .network import NetworkConfig

REFERENCE_PARAMS = 23.57e6
REFERENCE_FLOPS = 4.72e9
CALIBRATION_TOLERANCE = 0.20


def _block_params(dim: int, heads: int, mlp_ratio: int, lepe: bool) -> int:
    qkv = 3 * dim * dim  # N heads x three C x (C/N) projections, no bias
    out_proj = dim * dim
    norms = 4 * dim
    hidden = mlp_ratio * dim
    mlp = dim * hidden + hidden + hidden * dim + dim
    lepe_k = 9 * dim if lepe else 0  # 3x3 depthwise per value channel
    return qkv + out_proj + norms + mlp + lepe_k


def _conv_params(k: int, cin: int, cout: int) -> int:
    return k * k * cin * cout + cout


def _carafe_params(channels: int, sigma: int, cfg: NetworkConfig) -> int:
    kernels = sigma * sigma * cfg.carafe_k_up**2
    return _conv_params(1, channels, cfg.carafe_c_mid) + _conv_params(cfg.carafe_k_encoder, cfg.carafe_c_mid, kernels)


def _upsampler_params(channels: int, sigma: int, cfg: NetworkConfig) -> int:
    if cfg.upsampler == "carafe":
        return _carafe_params(channels, sigma, cfg)
    if cfg.upsampler == "transposed_conv":
        return sigma * sigma * channels * channels + channels
    return 0  # bilinear


def params_breakdown(cfg: NetworkConfig) -> dict[str, int]:
    c = cfg.embed_dim
    parts = {
        "embed": _conv_params(7, cfg.in_channels, c),
        "encoder_blocks": 0,
        "decoder_blocks": 0,
        "downsample": 0,
        "upsample": 0,
        "channel_halve": 0,
        "skip_fuse": 0,
        "head": _upsampler_params(c, 4, cfg) + _conv_params(1, c, cfg.num_classes),
    }
    for i in range(4):
        blk = _block_params(cfg.stage_dim(i), cfg.heads[i], cfg.mlp_ratio, cfg.lepe_enabled)
        parts["encoder_blocks"] += cfg.depths[i] * blk
        parts["decoder_blocks"] += cfg.depths[i] * blk
    for i in range(3):
        parts["downsample"] += _conv_params(3, cfg.stage_dim(i), cfg.stage_dim(i + 1))
    for d in range(3):
        src = cfg.stage_dim(3 - d)
        dst = src // 2
        parts["upsample"] += _upsampler_params(src, 2, cfg)
        parts["channel_halve"] += _conv_params(1, src, dst)
        if cfg.skip_enabled(d):
            parts["skip_fuse"] += _conv_params(1, 2 * dst, dst)
    return parts


def count_params(cfg: NetworkConfig) -> int:
    return sum(params_breakdown(cfg).values())


# -- FLOPs ----------------------------------------------------------------------


def stripe_attention_macs(h: int, w: int, dim: int, sw: int) -> int:
    """Score and value products for both stripe groups over an H x W map.

    Per horizontal stripe of T = sw*W tokens each of the N/2 group heads
    costs 2*T^2*d, so the group totals (H/sw) * (N/2) * 2*T^2 * (C/N)
    = sw*C*H*W*W; the vertical group mirrors it.
    """
    return sw * dim * h * w * (h + w)


def dense_attention_macs(h: int, w: int, dim: int) -> int:
    """Score and value products for global attention over all H*W tokens."""
    return 2 * (h * w) ** 2 * dim


def attention_projection_macs(h: int, w: int, dim: int) -> int:
    """QKV and output projections, identical for stripe and dense attention."""
    return 4 * h * w * dim * dim


def _block_macs(res: int, dim: int, sw: int, mlp_ratio: int, lepe: bool) -> int:
    tokens = res * res
    proj = attention_projection_macs(res, res, dim)
    mlp = 2 * mlp_ratio * tokens * dim * dim
    attn = stripe_attention_macs(res, res, dim, sw)
    lepe_k = 9 * tokens * dim if lepe else 0
    return proj + mlp + attn + lepe_k


def _conv_macs(k: int, cin: int, cout: int, out_res: int) -> int:
    return k * k * cin * cout * out_res * out_res


def _upsampler_macs(channels: int, sigma: int, in_res: int, cfg: NetworkConfig) -> tuple[int, int]:
    """(conv MACs, reassembly/resample MACs) of one upsampler application."""
    out_res = sigma * in_res
    if cfg.upsampler == "carafe":
        kernels = sigma * sigma * cfg.carafe_k_up**2
        conv = _conv_macs(1, channels, cfg.carafe_c_mid, in_res)
        conv += _conv_macs(cfg.carafe_k_encoder, cfg.carafe_c_mid, kernels, in_res)
        reass = out_res * out_res * cfg.carafe_k_up**2 * channels
        return conv, reass
    if cfg.upsampler == "transposed_conv":
        return out_res * out_res * channels * channels, 0
    return 0, 4 * out_res * out_res * channels  # bilinear: 4 corners per output


def flops_breakdown(cfg: NetworkConfig) -> dict[str, int]:
    c = cfg.embed_dim
    res0 = cfg.input_size // 4
    parts = {"conv": 0, "blocks_matmul": 0, "attention": 0, "upsample": 0}
    parts["conv"] += _conv_macs(7, cfg.in_channels, c, res0)
    for i in range(4):
        res, dim, sw = cfg.stage_resolution(i), cfg.stage_dim(i), cfg.stripe_widths[i]
        blocks = 2 * cfg.depths[i]  # encoder + mirrored decoder
        attn = stripe_attention_macs(res, res, dim, sw)
        lepe_k = 9 * res * res * dim if cfg.lepe_enabled else 0
        per_block_matmul = attention_projection_macs(res, res, dim) + 2 * cfg.mlp_ratio * res * res * dim * dim
        parts["blocks_matmul"] += blocks * per_block_matmul
        parts["attention"] += blocks * (attn + lepe_k)
    for i in range(3):
        parts["conv"] += _conv_macs(3, cfg.stage_dim(i), cfg.stage_dim(i + 1), cfg.stage_resolution(i + 1))
    for d in range(3):
        src = cfg.stage_dim(3 - d)
        dst = src // 2
        in_res = cfg.stage_resolution(3 - d)
        out_res = 2 * in_res
        conv, resample = _upsampler_macs(src, 2, in_res, cfg)
        parts["conv"] += conv
        parts["upsample"] += resample
        parts["conv"] += _conv_macs(1, src, dst, out_res)
        if cfg.skip_enabled(d):
            parts["conv"] += _conv_macs(1, 2 * dst, dst, out_res)
    conv, resample = _upsampler_macs(c, 4, res0, cfg)
    parts["conv"] += conv
    parts["upsample"] += resample
    parts["conv"] += _conv_macs(1, c, cfg.num_classes, cfg.input_size)
    return parts


def count_flops(cfg: NetworkConfig) -> int:
    return sum(flops_breakdown(cfg).values())


def within_reference(cfg: NetworkConfig, tolerance: float = CALIBRATION_TOLERANCE) -> tuple[bool, float, float]:
    """Check the config against the published complexity figures.

    Returns (ok, param_ratio, flop_ratio) with ratios relative to the
    reference values.
    """
    p = count_params(cfg) / REFERENCE_PARAMS
    f = count_flops(cfg) / REFERENCE_FLOPS
    ok = abs(p - 1.0) <= tolerance and abs(f - 1.0) <= tolerance
    return ok, p, f
