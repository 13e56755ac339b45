"""Dense-tensor CNN kernels with analytic backward passes.

Everything operates on float64 (batch, channels, height, width) arrays.
Convolutions use same-size zero padding at stride 1 and are evaluated as
im2col + GEMM; each forward returns a cache consumed by its backward.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import (
    DegenerateBatch,
    KernelTooLarge,
    LabelOutOfRange,
    ShapeMismatch,
)

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


def conv2d_forward(x: np.ndarray, kernels: np.ndarray, bias: np.ndarray):
    """Cross-correlate with zero padding that preserves spatial dims.

    x: (B, Cin, H, W); kernels: (Cout, Cin, kh, kw) with odd kh, kw;
    bias: (Cout,). Returns (out, cache).
    """
    B, Cin, H, W = x.shape
    Cout, cin_k, kh, kw = kernels.shape
    if cin_k != Cin:
        raise ShapeMismatch(f"kernel expects {cin_k} input channels, input has {Cin}")
    if kh % 2 == 0 or kw % 2 == 0:
        raise ShapeMismatch("same-padding convolution requires odd kernel dims")
    ph, pw = (kh - 1) // 2, (kw - 1) // 2
    padded = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    patches = sliding_window_view(padded, (kh, kw), axis=(2, 3))
    patches = patches.transpose(0, 2, 3, 1, 4, 5).reshape(B * H * W, Cin * kh * kw)
    out = patches @ kernels.reshape(Cout, -1).T + bias
    out = np.ascontiguousarray(out.reshape(B, H, W, Cout).transpose(0, 3, 1, 2))
    return out, (patches, x.shape, kernels)


def conv2d_backward(grad_out: np.ndarray, cache, need_input_grad: bool = True):
    """Gradients of conv2d_forward: (grad_input, grad_kernels, grad_bias).

    Pass need_input_grad=False for the first layer of a stack, where the
    input gradient would be discarded; it is the most expensive piece.
    """
    patches, x_shape, kernels = cache
    B, Cin, H, W = x_shape
    Cout, _, kh, kw = kernels.shape
    if grad_out.shape != (B, Cout, H, W):
        raise ShapeMismatch(f"grad_out shape {grad_out.shape} != {(B, Cout, H, W)}")
    g = grad_out.transpose(0, 2, 3, 1).reshape(B * H * W, Cout)
    grad_bias = g.sum(axis=0)
    grad_kernels = (patches.T @ g).T.reshape(Cout, Cin, kh, kw)
    grad_input = None
    if need_input_grad:
        # Scatter each output position's patch gradient back over the
        # padded input (overlap-add across the kh*kw offsets).
        ph, pw = (kh - 1) // 2, (kw - 1) // 2
        patch_grads = np.ascontiguousarray(
            (g @ kernels.reshape(Cout, -1))
            .reshape(B, H, W, Cin, kh, kw)
            .transpose(0, 3, 4, 5, 1, 2)
        )
        padded = np.zeros((B, Cin, H + 2 * ph, W + 2 * pw))
        for di in range(kh):
            for dj in range(kw):
                padded[:, :, di : di + H, dj : dj + W] += patch_grads[:, :, di, dj]
        grad_input = padded[:, :, ph : ph + H, pw : pw + W]
    return grad_input, grad_kernels, grad_bias


def relu_forward(x: np.ndarray):
    return np.maximum(x, 0.0), x > 0.0


def relu_backward(grad_out: np.ndarray, cache) -> np.ndarray:
    # Subgradient at 0 is 0: the mask is strict.
    return grad_out * cache


def batchnorm_forward(
    x: np.ndarray,
    gamma: np.ndarray,
    beta: np.ndarray,
    running_mean: np.ndarray,
    running_var: np.ndarray,
    train: bool,
    momentum: float = BN_MOMENTUM,
    eps: float = BN_EPS,
):
    """Per-channel normalization over (batch, height, width).

    Train mode normalizes with batch statistics and returns updated running
    stats (running = momentum * running + (1 - momentum) * batch); inference
    uses the running stats unchanged. Returns (out, cache, new_mean, new_var).
    """
    B, C, H, W = x.shape
    if gamma.shape != (C,) or beta.shape != (C,):
        raise ShapeMismatch("gamma/beta must have one value per channel")
    if train:
        if B * H * W < 2:
            raise DegenerateBatch("train-mode batchnorm needs >= 2 values per channel")
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        new_mean = momentum * running_mean + (1.0 - momentum) * mean
        new_var = momentum * running_var + (1.0 - momentum) * var
    else:
        mean, var = running_mean, running_var
        new_mean, new_var = running_mean, running_var
    inv_std = 1.0 / np.sqrt(var + eps)
    # Single fused affine: out = x * (gamma/std) + (beta - mean*gamma/std).
    scale = gamma * inv_std
    out = x * scale[None, :, None, None]
    out += (beta - mean * scale)[None, :, None, None]
    return out, (x, mean, inv_std, gamma, train), new_mean, new_var


def batchnorm_backward(grad_out: np.ndarray, cache):
    """Returns (grad_input, grad_gamma, grad_beta)."""
    x, mean, inv_std, gamma, train = cache
    B, C, H, W = x.shape
    xhat = x - mean[None, :, None, None]
    xhat *= inv_std[None, :, None, None]
    grad_gamma = (grad_out * xhat).sum(axis=(0, 2, 3))
    grad_beta = grad_out.sum(axis=(0, 2, 3))
    if train:
        m = B * H * W
        # d(xhat) folded analytically: gamma * (m*g - sum(g) - xhat*sum(g*xhat)) / m
        coeff = (gamma * inv_std) / m
        grad_input = m * grad_out - grad_beta[None, :, None, None]
        grad_input -= xhat * grad_gamma[None, :, None, None]
        grad_input *= coeff[None, :, None, None]
    else:
        grad_input = grad_out * (gamma * inv_std)[None, :, None, None]
    return grad_input, grad_gamma, grad_beta


def maxpool_forward(x: np.ndarray, kernel: tuple[int, int]):
    """Non-overlapping max pooling; trailing rows/cols that do not fill a
    window are dropped (floor division on output dims)."""
    kh, kw = kernel
    B, C, H, W = x.shape
    if H < kh or W < kw:
        raise KernelTooLarge(f"pool kernel {kernel} exceeds spatial dims {(H, W)}")
    Ho, Wo = H // kh, W // kw
    windows = (
        x[:, :, : Ho * kh, : Wo * kw]
        .reshape(B, C, Ho, kh, Wo, kw)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(B, C, Ho, Wo, kh * kw)
    )
    arg = windows.argmax(axis=-1)  # first occurrence wins ties
    out = np.take_along_axis(windows, arg[..., None], axis=-1)[..., 0]
    return out, (x.shape, kernel, arg)


def maxpool_backward(grad_out: np.ndarray, cache) -> np.ndarray:
    x_shape, (kh, kw), arg = cache
    B, C, H, W = x_shape
    Ho, Wo = H // kh, W // kw
    windows = np.zeros((B, C, Ho, Wo, kh * kw))
    np.put_along_axis(windows, arg[..., None], grad_out[..., None], axis=-1)
    grad_input = np.zeros(x_shape)
    grad_input[:, :, : Ho * kh, : Wo * kw] = (
        windows.reshape(B, C, Ho, Wo, kh, kw)
        .transpose(0, 1, 2, 4, 3, 5)
        .reshape(B, C, Ho * kh, Wo * kw)
    )
    return grad_input


def concat_heights(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Stack two activation tensors along the height dimension."""
    if a.shape[0] != b.shape[0] or a.shape[1] != b.shape[1] or a.shape[3] != b.shape[3]:
        raise ShapeMismatch(f"cannot concat {a.shape} with {b.shape} along height")
    return np.concatenate([a, b], axis=2)


def split_heights(grad: np.ndarray, height_a: int):
    return grad[:, :, :height_a, :], grad[:, :, height_a:, :]


def dense_forward(x: np.ndarray, weight: np.ndarray, bias: np.ndarray):
    """x: (B, D); weight: (D, K); bias: (K,). Returns (logits, cache)."""
    if x.shape[1] != weight.shape[0]:
        raise ShapeMismatch(f"dense expects {weight.shape[0]} features, got {x.shape[1]}")
    return x @ weight + bias, (x, weight)


def dense_backward(grad_out: np.ndarray, cache):
    x, weight = cache
    return grad_out @ weight.T, x.T @ grad_out, grad_out.sum(axis=0)


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row-wise softmax, computed with max subtraction for stability."""
    z = logits - logits.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def cross_entropy(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample loss -ln(p_label); labels must lie in [0, K)."""
    probs = np.atleast_2d(probs)
    labels = np.atleast_1d(labels)
    K = probs.shape[1]
    if labels.min() < 0 or labels.max() >= K:
        raise LabelOutOfRange(f"labels must lie in [0, {K})")
    return -np.log(probs[np.arange(probs.shape[0]), labels])


def softmax_cross_entropy_grad(probs: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Combined gradient of cross_entropy(softmax(z)) wrt z: probs - onehot."""
    grad = probs.copy()
    grad[np.arange(probs.shape[0]), labels] -= 1.0
    return grad


def kaiming_uniform(shape: tuple[int, ...], fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """ReLU-gain uniform init: U(-sqrt(6/fan_in), sqrt(6/fan_in))."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


@dataclass
class AdamOptimizer:
    """Adam with bias correction; one moment pair per parameter key."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    _m: dict = field(default_factory=dict)
    _v: dict = field(default_factory=dict)
    _t: int = 0

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        """Update params in place from grads (keys must match)."""
        self._t += 1
        bc1 = 1.0 - self.beta1**self._t
        bc2 = 1.0 - self.beta2**self._t
        for key, grad in grads.items():
            m = self._m.setdefault(key, np.zeros_like(grad))
            v = self._v.setdefault(key, np.zeros_like(grad))
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad * grad
            params[key] -= self.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + self.eps)
