"""Independent reference implementations used only by the test suite.

Everything here is deliberately written as plain numpy (loops where that is
the most obvious form) and shares no code with the package internals, so a
bug in the production path cannot hide in its own oracle.
"""

from __future__ import annotations

import numpy as np


def conv2d_naive(x, w, bias=None, stride=1, padding=0):
    """Quadruple-loop cross-correlation. x [H,W,Cin], w [kh,kw,Cin,Cout]."""
    h, wd, cin = x.shape
    kh, kw, _, cout = w.shape
    xp = np.pad(x, ((padding, padding), (padding, padding), (0, 0)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((ho, wo, cout), dtype=x.dtype)
    for i in range(ho):
        for j in range(wo):
            for ki in range(kh):
                for kj in range(kw):
                    px = xp[i * stride + ki, j * stride + kj, :]
                    out[i, j, :] += px @ w[ki, kj, :, :]
    if bias is not None:
        out += bias
    return out


def depthwise_conv2d_naive(x, w, stride=1, padding=0):
    """Per-channel loop convolution. x [H,W,C], w [kh,kw,C]."""
    h, wd, c = x.shape
    kh, kw, _ = w.shape
    xp = np.pad(x, ((padding, padding), (padding, padding), (0, 0)))
    ho = (h + 2 * padding - kh) // stride + 1
    wo = (wd + 2 * padding - kw) // stride + 1
    out = np.zeros((ho, wo, c), dtype=x.dtype)
    for i in range(ho):
        for j in range(wo):
            patch = xp[i * stride : i * stride + kh, j * stride : j * stride + kw, :]
            out[i, j, :] = (patch * w).sum(axis=(0, 1))
    return out


def softmax_rows(a):
    a = a - a.max(axis=-1, keepdims=True)
    e = np.exp(a)
    return e / e.sum(axis=-1, keepdims=True)


def dense_attention(tokens, wq, wk, wv):
    """Plain single-head attention over a token list [L,C] with C x d weights."""
    q = tokens @ wq
    k = tokens @ wk
    v = tokens @ wv
    scores = (q @ k.T) / np.sqrt(wq.shape[1])
    return softmax_rows(scores) @ v


def cross_window_attention(x, wq, wk, wv, wo, sw):
    """Two-group stripe attention over x [H,W,C].

    wq/wk/wv are per-head weight lists (length N, each C x d); the first
    half of the heads attends inside horizontal stripes of width sw, the
    second half inside vertical stripes.  Heads concatenate channel-wise
    and the result is projected by wo [C,C].
    """
    h, w, c = x.shape
    n = len(wq)
    half = n // 2
    outs = []
    for head in range(half):
        y = np.zeros((h, w, wq[head].shape[1]), dtype=x.dtype)
        for s in range(h // sw):
            stripe = x[s * sw : (s + 1) * sw, :, :]
            tok = stripe.reshape(-1, c)
            att = dense_attention(tok, wq[head], wk[head], wv[head])
            y[s * sw : (s + 1) * sw, :, :] = att.reshape(sw, w, -1)
        outs.append(y)
    for head in range(half, n):
        y = np.zeros((h, w, wq[head].shape[1]), dtype=x.dtype)
        for s in range(w // sw):
            stripe = x[:, s * sw : (s + 1) * sw, :]
            tok = stripe.reshape(-1, c)
            att = dense_attention(tok, wq[head], wk[head], wv[head])
            y[:, s * sw : (s + 1) * sw, :] = att.reshape(h, sw, -1)
        outs.append(y)
    return np.concatenate(outs, axis=-1) @ wo


def reassemble_naive(x, field, sigma, k_up):
    """Five-nested-loop weighted reassembly.

    x [H,W,C], field [sigma*H, sigma*W, k_up^2]; out-of-bounds neighbors
    contribute zero.
    """
    h, w, c = x.shape
    r = k_up // 2
    out = np.zeros((sigma * h, sigma * w, c), dtype=x.dtype)
    for ip in range(sigma * h):
        for jp in range(sigma * w):
            i, j = ip // sigma, jp // sigma
            for n in range(-r, r + 1):
                for m in range(-r, r + 1):
                    si, sj = i + n, j + m
                    if 0 <= si < h and 0 <= sj < w:
                        wgt = field[ip, jp, (n + r) * k_up + (m + r)]
                        out[ip, jp, :] += wgt * x[si, sj, :]
    return out


def boundary_pixels(mask):
    """Pixels of a binary mask with a 4-neighbor outside the mask (or the image)."""
    pts = []
    h, w = mask.shape
    for i in range(h):
        for j in range(w):
            if not mask[i, j]:
                continue
            on_edge = i == 0 or j == 0 or i == h - 1 or j == w - 1
            if on_edge or not (mask[i - 1, j] and mask[i + 1, j] and mask[i, j - 1] and mask[i, j + 1]):
                pts.append((i, j))
    return pts


def hausdorff_bruteforce(mask_a, mask_b):
    """All-pairs symmetric Hausdorff (full max and 95th percentile) in pixels."""
    a = boundary_pixels(mask_a)
    b = boundary_pixels(mask_b)
    h, w = mask_a.shape
    if not a and not b:
        return 0.0, 0.0
    if not a or not b:
        diag = float(np.hypot(h - 1, w - 1))
        return diag, diag

    def directed(src, dst):
        mins = []
        for (i, j) in src:
            best = min((i - p) * (i - p) + (j - q) * (j - q) for (p, q) in dst)
            mins.append(np.sqrt(best))
        return np.asarray(mins)

    d_ab = directed(a, b)
    d_ba = directed(b, a)
    hd = max(float(d_ab.max()), float(d_ba.max()))
    hd95 = max(float(np.percentile(d_ab, 95)), float(np.percentile(d_ba, 95)))
    return hd, hd95


def confusion_counts(pred, true):
    """(TP, FP, TN, FN) by direct enumeration over binary masks."""
    tp = fp = tn = fn = 0
    for p, t in zip(pred.reshape(-1), true.reshape(-1)):
        if p and t:
            tp += 1
        elif p and not t:
            fp += 1
        elif not p and not t:
            tn += 1
        else:
            fn += 1
    return tp, fp, tn, fn


def cross_entropy_scalar(logits, labels):
    """Mean pixel NLL computed with plain scalar math."""
    h, w, k = logits.shape
    total = 0.0
    for i in range(h):
        for j in range(w):
            row = logits[i, j, :] - logits[i, j, :].max()
            p = np.exp(row) / np.exp(row).sum()
            total += -np.log(p[labels[i, j]])
    return total / (h * w)


def dice_loss_scalar(logits, labels, smooth):
    """Soft multi-class Dice loss recomputed directly."""
    h, w, k = logits.shape
    probs = softmax_rows(logits.reshape(-1, k)).reshape(h, w, k)
    onehot = np.eye(k)[labels]
    total = 0.0
    for c in range(k):
        inter = (probs[:, :, c] * onehot[:, :, c]).sum()
        denom = probs[:, :, c].sum() + onehot[:, :, c].sum()
        total += (2.0 * inter + smooth) / (denom + smooth)
    return 1.0 - total / k
