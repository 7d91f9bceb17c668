"""Weight initialization."""

from __future__ import annotations

import numpy as np

from .tensor import DTYPES, Tensor


def trunc_normal(rng: np.random.Generator, shape, std: float = 0.02, dtype: str = "f32") -> Tensor:
    """Normal(0, std) with resampling outside +-2 std."""
    out = rng.normal(0.0, std, size=shape)
    bad = np.abs(out) > 2 * std
    while bad.any():
        out[bad] = rng.normal(0.0, std, size=int(bad.sum()))
        bad = np.abs(out) > 2 * std
    return Tensor(out.astype(DTYPES[dtype]), requires_grad=True)


def conv_trunc_normal(rng: np.random.Generator, shape, dtype: str = "f32") -> Tensor:
    """Fan-in-scaled truncated normal for conv kernels [kh,kw,Cin,Cout].

    Layer-norm keeps the transformer blocks scale-stable, but the conv
    chain (embedding, resampling, fusion, classifier) has no normalization,
    so a fixed std would shrink activations multiplicatively per layer;
    std = sqrt(2 / fan_in) keeps the forward scale roughly constant.
    """
    fan_in = int(np.prod(shape[:-1]))
    return trunc_normal(rng, shape, float(np.sqrt(2.0 / fan_in)), dtype)
