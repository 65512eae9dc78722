"""Network layer vocabulary: (dilated) convolution, ReLU, max pooling,
transposed convolution, nearest upsampling, channel concatenation,
pixelwise softmax cross-entropy, and SGD with momentum.

All image tensors are channels-first ``(C, H, W)``. Convolution weights
are ``(out, in, m, m)`` with square kernels; dilated kernels space their
taps by the dilation rate, enlarging the receptive field without adding
parameters.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor
from .errors import ContractViolation


def _pad_pair(padding) -> tuple[int, int]:
    if isinstance(padding, (tuple, list)):
        ph, pw = padding
        return int(ph), int(pw)
    return int(padding), int(padding)


def he_uniform(shape, fan_in: int, rng: np.random.Generator, dtype) -> np.ndarray:
    """Uniform init with variance 2/fan_in, which keeps activation variance
    level through ReLU conv stacks (a straight variance-preserving init
    decays signal by half per rectified layer, starving the deep levels)."""
    limit = np.sqrt(6.0 / fan_in)
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 1,
           dilation: int = 1, padding=0) -> Tensor:
    """2-D convolution on a (C,H,W) tensor, differentiable in x, weight, bias.

    out[o,i,j] = bias[o] + sum_{c,a,b} w[o,c,a,b] * x[c, i*stride + a*d, j*stride + b*d]
    evaluated on the zero-padded input.
    """
    c_in, h, w = x.shape
    o_ch, c_w, m, m2 = weight.shape
    if m != m2:
        raise ContractViolation(f"kernel must be square, got {m}x{m2}")
    if c_in != c_w:
        raise ContractViolation(f"conv2d channel mismatch: input {c_in}, weight expects {c_w}")
    if dilation < 1 or stride < 1:
        raise ContractViolation("stride and dilation must be >= 1")
    ph, pw = _pad_pair(padding)
    eff = dilation * (m - 1) + 1
    h_out = (h + 2 * ph - eff) // stride + 1
    w_out = (w + 2 * pw - eff) // stride + 1
    if eff > h + 2 * ph or eff > w + 2 * pw or h_out <= 0 or w_out <= 0:
        raise ContractViolation(
            f"effective kernel extent {eff} exceeds padded input {h + 2 * ph}x{w + 2 * pw}")

    xp = np.pad(x.data, ((0, 0), (ph, ph), (pw, pw)))
    patches = np.empty((c_in, m, m, h_out, w_out), dtype=x.dtype)
    for a in range(m):
        ra = a * dilation
        for b in range(m):
            rb = b * dilation
            patches[:, a, b] = xp[:, ra:ra + (h_out - 1) * stride + 1:stride,
                                  rb:rb + (w_out - 1) * stride + 1:stride]
    out_data = np.tensordot(weight.data, patches, axes=([1, 2, 3], [0, 1, 2]))
    out_data += bias.data[:, None, None]

    from .autograd import _result
    out = _result(out_data, (x, weight, bias), None, "conv2d")

    def backward():
        g = out.grad
        if weight.requires_grad:
            weight.accumulate_grad(np.tensordot(g, patches, axes=([1, 2], [3, 4])))
        if bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=(1, 2)))
        if x.requires_grad:
            gxp = np.zeros_like(xp)
            for a in range(m):
                ra = a * dilation
                for b in range(m):
                    rb = b * dilation
                    gxp[:, ra:ra + (h_out - 1) * stride + 1:stride,
                        rb:rb + (w_out - 1) * stride + 1:stride] += \
                        np.tensordot(weight.data[:, :, a, b], g, axes=([0], [0]))
            x.accumulate_grad(gxp[:, ph:ph + h, pw:pw + w])

    out.backward_fn = backward if out.requires_grad else None
    return out


def relu(x: Tensor) -> Tensor:
    """Elementwise max(0, x); gradient passes where x > 0."""
    mask = x.data > 0
    from .autograd import _result
    out = _result(np.where(mask, x.data, 0), (x,), None, "relu")

    def backward():
        if x.requires_grad:
            x.accumulate_grad(out.grad * mask)

    out.backward_fn = backward if out.requires_grad else None
    return out


def max_pool2d(x: Tensor) -> Tensor:
    """2x2 non-overlapping max pooling; gradient routes to the argmax
    (first position in row-major order on ties)."""
    c, h, w = x.shape
    if h % 2 or w % 2:
        raise ContractViolation(f"max_pool2d needs even extents, got {h}x{w}")
    h2, w2 = h // 2, w // 2
    blocks = x.data.reshape(c, h2, 2, w2, 2).transpose(0, 1, 3, 2, 4).reshape(c, h2, w2, 4)
    idx = blocks.argmax(axis=3)
    out_data = np.take_along_axis(blocks, idx[..., None], axis=3)[..., 0]

    from .autograd import _result
    out = _result(out_data, (x,), None, "max_pool2d")

    def backward():
        if x.requires_grad:
            gx = np.zeros_like(x.data)
            rows = np.arange(h2)[None, :, None] * 2 + idx // 2
            cols = np.arange(w2)[None, None, :] * 2 + idx % 2
            chans = np.arange(c)[:, None, None]
            gx[chans, rows, cols] = out.grad
            x.accumulate_grad(gx)

    out.backward_fn = backward if out.requires_grad else None
    return out


def transposed_conv2d(x: Tensor, weight: Tensor, bias: Tensor, stride: int = 2) -> Tensor:
    """Transposed convolution: each input element scatters weight*value
    into its m x m output window; overlaps sum."""
    c_in, h, w = x.shape
    o_ch, c_w, m, _ = weight.shape
    if c_in != c_w:
        raise ContractViolation(f"transposed_conv2d channel mismatch: {c_in} vs {c_w}")
    h_out = (h - 1) * stride + m
    w_out = (w - 1) * stride + m

    prod = np.tensordot(weight.data, x.data, axes=([1], [0]))  # (O, m, m, H, W)
    out_data = np.zeros((o_ch, h_out, w_out), dtype=x.dtype)
    for a in range(m):
        for b in range(m):
            out_data[:, a:a + (h - 1) * stride + 1:stride,
                     b:b + (w - 1) * stride + 1:stride] += prod[:, a, b]
    out_data += bias.data[:, None, None]

    from .autograd import _result
    out = _result(out_data, (x, weight, bias), None, "transposed_conv2d")

    def backward():
        g = out.grad
        gsub = np.empty((o_ch, m, m, h, w), dtype=g.dtype)
        for a in range(m):
            for b in range(m):
                gsub[:, a, b] = g[:, a:a + (h - 1) * stride + 1:stride,
                                  b:b + (w - 1) * stride + 1:stride]
        if weight.requires_grad:
            gw = np.tensordot(gsub, x.data, axes=([3, 4], [1, 2]))  # (O, m, m, C)
            weight.accumulate_grad(gw.transpose(0, 3, 1, 2))
        if bias.requires_grad:
            bias.accumulate_grad(g.sum(axis=(1, 2)))
        if x.requires_grad:
            x.accumulate_grad(np.tensordot(weight.data, gsub, axes=([0, 2, 3], [0, 1, 2])))

    out.backward_fn = backward if out.requires_grad else None
    return out


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """Replicate each pixel factor x factor; backward sums each block."""
    if factor < 1:
        raise ContractViolation(f"upsample factor must be >= 1, got {factor}")
    if factor == 1:
        data = x.data.copy()
    else:
        data = np.repeat(np.repeat(x.data, factor, axis=1), factor, axis=2)

    from .autograd import _result
    out = _result(data, (x,), None, "upsample_nearest")

    def backward():
        if x.requires_grad:
            c, h, w = x.shape
            g = out.grad.reshape(c, h, factor, w, factor)
            x.accumulate_grad(g.sum(axis=(2, 4)))

    out.backward_fn = backward if out.requires_grad else None
    return out


def concat_channels(xs: list[Tensor]) -> Tensor:
    """Concatenate along the channel axis; spatial extents must agree."""
    if not xs:
        raise ContractViolation("concat_channels needs at least one input")
    hw = xs[0].shape[1:]
    for t in xs[1:]:
        if t.shape[1:] != hw:
            raise ContractViolation(f"concat spatial mismatch: {t.shape[1:]} vs {hw}")
    data = np.concatenate([t.data for t in xs], axis=0)

    from .autograd import _result
    out = _result(data, tuple(xs), None, "concat_channels")

    def backward():
        g = out.grad
        offset = 0
        for t in xs:
            c = t.shape[0]
            if t.requires_grad:
                t.accumulate_grad(g[offset:offset + c])
            offset += c

    out.backward_fn = backward if out.requires_grad else None
    return out


def softmax_cross_entropy(logits: Tensor, target: np.ndarray) -> Tensor:
    """Mean over pixels of -log softmax(logits)[target class].

    logits: (K,H,W); target: (H,W) integer class map; for the binary
    segmentation head K = 2 and target values are in {0, 1}.
    """
    k, h, w = logits.shape
    target = np.asarray(target)
    if target.shape != (h, w):
        raise ContractViolation(f"target shape {target.shape} != logits spatial {(h, w)}")
    tgt = target.astype(np.int64, copy=False)
    if tgt.min() < 0 or tgt.max() >= k:
        raise ContractViolation(f"target values must lie in [0, {k - 1}]")

    z = logits.data
    zmax = z.max(axis=0)
    ez = np.exp(z - zmax)
    sez = ez.sum(axis=0)
    lse = zmax + np.log(sez)
    picked = np.take_along_axis(z, tgt[None], axis=0)[0]
    n = h * w
    loss_val = np.asarray((lse - picked).sum() / n, dtype=z.dtype)

    from .autograd import _result
    out = _result(loss_val, (logits,), None, "softmax_cross_entropy")

    def backward():
        if logits.requires_grad:
            p = ez / sez
            onehot = np.zeros_like(p)
            np.put_along_axis(onehot, tgt[None], 1.0, axis=0)
            logits.accumulate_grad(out.grad * (p - onehot) / n)

    out.backward_fn = backward if out.requires_grad else None
    return out


class Conv2d:
    """Convolution layer owning its weight (out,in,m,m) and bias (out,)."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 stride: int = 1, dilation: int = 1, padding=0,
                 rng: np.random.Generator | None = None, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        self.dilation = dilation
        self.padding = padding
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Tensor(he_uniform(
            (out_channels, in_channels, kernel_size, kernel_size), fan_in, rng, dtype),
            requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return conv2d(x, self.weight, self.bias, self.stride, self.dilation, self.padding)


class TransposedConv2d:
    """2x upsampling transposed convolution (2x2 kernel, stride 2)."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 2,
                 stride: int = 2, rng: np.random.Generator | None = None, dtype=np.float32):
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        self.stride = stride
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel_size * kernel_size
        self.weight = Tensor(he_uniform(
            (out_channels, in_channels, kernel_size, kernel_size), fan_in, rng, dtype),
            requires_grad=True)
        self.bias = Tensor(np.zeros(out_channels, dtype=dtype), requires_grad=True)

    def __call__(self, x: Tensor) -> Tensor:
        return transposed_conv2d(x, self.weight, self.bias, self.stride)


class SGD:
    """Stochastic gradient descent with momentum, weight decay, and a
    hyperbolic per-epoch learning-rate decay.

    Update per parameter: v <- mu*v + (grad + lambda*w); w <- w - eta*v.
    Learning rate after e epochs is eta0 / (1 + decay*e).
    """

    def __init__(self, params: dict[str, Tensor], learning_rate: float = 0.001,
                 momentum: float = 0.9, weight_decay: float = 0.0005,
                 lr_decay: float = 1e-4):
        if learning_rate <= 0:
            raise ContractViolation("learning rate must be positive")
        self.params = dict(params)
        self.lr0 = learning_rate
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.lr_decay = lr_decay
        self.epoch = 0
        self.velocity = {name: np.zeros_like(t.data) for name, t in self.params.items()}

    @property
    def learning_rate(self) -> float:
        return self.lr0 / (1.0 + self.lr_decay * self.epoch)

    def set_epoch(self, epoch: int) -> None:
        self.epoch = epoch

    def step(self) -> None:
        """Apply one update from the populated grads, then clear them."""
        lr = self.learning_rate
        for name, t in self.params.items():
            if t.grad is None:
                raise ContractViolation(f"parameter {name!r} has no gradient; run backward first")
            v = self.velocity[name]
            v *= self.momentum
            v += t.grad + self.weight_decay * t.data
            t.data -= (lr * v).astype(t.data.dtype, copy=False)
            t.grad = None


def sgd_step(params: dict[str, Tensor], state: SGD) -> None:
    """Single optimizer step over ``params`` using ``state``'s hyperparameters."""
    if set(params) - set(state.params):
        raise ContractViolation("sgd_step received parameters unknown to the optimizer state")
    state.step()
