"""Dense float64 tensor ops for forward passes on small batches.

Everything here works on plain numpy arrays in NCHW layout. There is no
autograd; the only gradient the scoring pipeline needs (the classifier
weight gradient under softmax cross-entropy) has a closed form and lives in
fc_weight_grad.
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

Tensor = np.ndarray


def conv2d(x: Tensor, weight: Tensor, stride: int = 1, padding: int = 0) -> Tensor:
    """Cross-correlate x [B,Cin,H,W] with weight [Cout,Cin,k,k], zero padded.

    Output spatial size is floor((H + 2*padding - k) / stride) + 1. No bias.
    Implemented as im2col: gather k*k windows with a strided view, then one
    matmul against the flattened kernels.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise ValueError(f"conv2d expects 4-d input and weight, got {x.shape} and {weight.shape}")
    b, cin, h, w = x.shape
    cout, cin_w, kh, kw = weight.shape
    if kh != kw:
        raise ValueError(f"kernel must be square, got {kh}x{kw}")
    k = kh
    if k % 2 != 1:
        raise ValueError(f"kernel size must be odd, got {k}")
    if cin != cin_w:
        raise ValueError(f"input has {cin} channels but weight expects {cin_w}")
    if stride < 1 or padding < 0:
        raise ValueError(f"bad stride/padding: {stride}, {padding}")
    if h + 2 * padding < k or w + 2 * padding < k:
        raise ValueError(f"padded input {h + 2 * padding}x{w + 2 * padding} smaller than kernel {k}")

    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (k, k), axis=(2, 3))[:, :, ::stride, ::stride]
    _, _, ho, wo, _, _ = windows.shape
    cols = windows.transpose(0, 2, 3, 1, 4, 5).reshape(b * ho * wo, cin * k * k)
    out = cols @ weight.reshape(cout, cin * k * k).T
    return out.reshape(b, ho, wo, cout).transpose(0, 3, 1, 2)


def relu(x: Tensor) -> Tensor:
    return np.maximum(x, 0.0)


def batchnorm_batchstats(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize [B,C,H,W] per channel with statistics of this batch.

    Mean and variance (population, ddof=0) are taken over batch and spatial
    axes together. There are no running statistics: scoring always sees
    freshly initialized networks, so train-mode statistics are the contract.
    """
    if x.ndim != 4:
        raise ValueError(f"batchnorm expects [B,C,H,W], got shape {x.shape}")
    b, c, h, w = x.shape
    if b * h * w <= 1:
        raise ValueError("batch statistics need more than one value per channel")
    if gamma.shape != (c,) or beta.shape != (c,):
        raise ValueError(f"gamma/beta must have shape ({c},)")
    mean = x.mean(axis=(0, 2, 3), keepdims=True)
    var = x.var(axis=(0, 2, 3), keepdims=True)
    xhat = (x - mean) / np.sqrt(var + eps)
    return gamma.reshape(1, c, 1, 1) * xhat + beta.reshape(1, c, 1, 1)


def global_avg_pool(x: Tensor) -> Tensor:
    """[B,C,H,W] -> [B,C], mean over the spatial axes."""
    if x.ndim != 4:
        raise ValueError(f"global_avg_pool expects [B,C,H,W], got shape {x.shape}")
    return x.mean(axis=(2, 3))


def avg_pool2d(x: Tensor, kernel: int, stride: int = 1, padding: int = 0) -> Tensor:
    """Average pooling with zero padding; the divisor counts only real pixels.

    Padding contributes zeros to the window sum but not to the divisor, so a
    constant input stays constant at the borders.
    """
    if x.ndim != 4:
        raise ValueError(f"avg_pool2d expects [B,C,H,W], got shape {x.shape}")
    b, c, h, w = x.shape
    if h + 2 * padding < kernel or w + 2 * padding < kernel:
        raise ValueError("window larger than padded input")
    if padding:
        x = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    windows = sliding_window_view(x, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride]
    sums = windows.sum(axis=(4, 5))
    ones = np.ones((1, 1, h, w))
    if padding:
        ones = np.pad(ones, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    counts = sliding_window_view(ones, (kernel, kernel), axis=(2, 3))[:, :, ::stride, ::stride].sum(axis=(4, 5))
    return sums / counts


def linear(features: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """[B,C] @ [N,C]^T (+ bias [N]) -> [B,N]."""
    if features.ndim != 2 or weight.ndim != 2:
        raise ValueError("linear expects 2-d features and weight")
    if features.shape[1] != weight.shape[1]:
        raise ValueError(f"features have {features.shape[1]} columns but weight expects {weight.shape[1]}")
    out = features @ weight.T
    if bias is not None:
        if bias.shape != (weight.shape[0],):
            raise ValueError(f"bias must have shape ({weight.shape[0]},)")
        out = out + bias
    return out


def residual_add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ValueError(f"residual shapes differ: {a.shape} vs {b.shape}")
    return a + b


def softmax(logits: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax (max subtraction)."""
    z = logits - logits.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(logits: Tensor, axis: int = -1) -> Tensor:
    z = logits - logits.max(axis=axis, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=axis, keepdims=True))


def softmax_cross_entropy(logits: Tensor, labels: Tensor) -> float:
    """Mean cross-entropy of integer labels under softmax(logits).

    logits [B,N], labels int [B] with values in [0, N).
    """
    if logits.ndim != 2:
        raise ValueError(f"logits must be [B,N], got shape {logits.shape}")
    b, n = logits.shape
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ValueError(f"labels must have shape ({b},)")
    if labels.min() < 0 or labels.max() >= n:
        raise ValueError(f"labels must lie in [0, {n})")
    logp = log_softmax(logits, axis=1)
    return float(-logp[np.arange(b), labels].mean())


def fc_weight_grad(features: Tensor, logits: Tensor, labels: Tensor) -> Tensor:
    """Gradient of mean softmax cross-entropy w.r.t. the classifier weight.

    For logits = features @ W^T (+ bias), dLoss/dW has the closed form
    (1/B) * (softmax(logits) - onehot(labels))^T @ features, shape [N,C].
    """
    if features.ndim != 2 or logits.ndim != 2:
        raise ValueError("features and logits must be 2-d")
    b, c = features.shape
    if logits.shape[0] != b:
        raise ValueError(f"batch mismatch: features {b}, logits {logits.shape[0]}")
    n = logits.shape[1]
    labels = np.asarray(labels)
    if labels.shape != (b,):
        raise ValueError(f"labels must have shape ({b},)")
    if labels.min() < 0 or labels.max() >= n:
        raise ValueError(f"labels must lie in [0, {n})")
    delta = softmax(logits, axis=1)
    delta[np.arange(b), labels] -= 1.0
    return delta.T @ features / b
