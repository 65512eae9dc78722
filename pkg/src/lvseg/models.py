"""Topology builders for the three segmentation networks.

All three share a 4-level encoder-decoder body: two 3x3 conv+ReLU per
level, 2x2 max pooling on the way down (channel width doubling each
time), transposed-conv upsampling with skip concatenation on the way up.
The dilated variant widens the receptive field by running the encoder and
bottleneck convolutions at dilation 2 (padding widened to keep extents
level-constant); the decoder stays at dilation 1, which keeps fine
boundary localization intact (a stack dilated end to end samples a sparse
lattice at the finest level and visibly quantizes the predicted border).
The multi-feature-pyramid variant additionally taps every decoder level
through a 3x3 conv to 16 channels, upsamples each tap to full resolution,
concatenates the four taps into a 64-channel map, and classifies that
with a 1x1 convolution.

The input is a 2-channel square image (raw intensity plus the thresholded
contrast channel); the output is a 2-channel logit map (background,
foreground). Decoder stages are indexed up1..up4 with up1 the deepest
(coarsest) stage and up4 at full resolution.
"""

from __future__ import annotations

import numpy as np

from .autograd import Tensor
from .errors import ContractViolation
from .layers import Conv2d, TransposedConv2d, concat_channels, max_pool2d, relu, upsample_nearest

ARCH_TAGS = ("unet", "dilated-unet", "mfp-unet")
IN_CHANNELS = 2
OUT_CHANNELS = 2
LEVELS = 4
PYRAMID_CHANNELS = 16


class Model:
    """Ordered layer graph with a stable named parameter map."""

    def __init__(self, arch: str, n: int, base_width: int, dilation: int,
                 dtype=np.float32, seed: int = 0):
        if arch not in ARCH_TAGS:
            raise ContractViolation(f"unknown architecture tag {arch!r}")
        if n % 16 != 0 or n <= 0:
            raise ContractViolation(f"input extent must be a positive multiple of 16, got {n}")
        if base_width < 2:
            raise ContractViolation(f"base width must be >= 2, got {base_width}")
        if dilation < 1:
            raise ContractViolation(f"dilation must be >= 1, got {dilation}")
        self.arch = arch
        self.n = n
        self.base_width = base_width
        self.dilation = dilation
        self.dtype = dtype
        rng = np.random.default_rng(seed)

        B = base_width

        def conv3(cin, cout, d):
            # "same" padding keeps extents constant within a level
            return Conv2d(cin, cout, 3, dilation=d, padding=d, rng=rng, dtype=dtype)

        self.encoders = []
        cin = IN_CHANNELS
        for lvl in range(LEVELS):
            cout = B * (2 ** lvl)
            self.encoders.append((conv3(cin, cout, dilation), conv3(cout, cout, dilation)))
            cin = cout
        self.bottleneck = (conv3(8 * B, 16 * B, dilation), conv3(16 * B, 16 * B, dilation))

        self.decoders = []
        for stage in range(1, LEVELS + 1):  # up1 deepest .. up4 full resolution
            cup = B * (2 ** (LEVELS - stage))        # channels after upsampling
            self.decoders.append((
                TransposedConv2d(2 * cup, cup, rng=rng, dtype=dtype),
                conv3(2 * cup, cup, 1),              # skip concat doubles the input
                conv3(cup, cup, 1),
            ))

        if arch == "mfp-unet":
            self.pyramid = [
                Conv2d(B * (2 ** (LEVELS - stage)), PYRAMID_CHANNELS, 3, padding=1,
                       rng=rng, dtype=dtype)
                for stage in range(1, LEVELS + 1)
            ]
            self.classifier = Conv2d(LEVELS * PYRAMID_CHANNELS, OUT_CHANNELS, 1,
                                     rng=rng, dtype=dtype)
        else:
            self.pyramid = None
            self.classifier = Conv2d(B, OUT_CHANNELS, 1, rng=rng, dtype=dtype)

    # -- forward -------------------------------------------------------

    def features(self, x: Tensor) -> Tensor:
        """Pre-classifier feature map: the topmost decoder output for the
        plain variants, the 64-channel pyramid concatenation otherwise."""
        if x.shape != (IN_CHANNELS, self.n, self.n):
            raise ContractViolation(
                f"input shape {x.shape} does not match model spec {(IN_CHANNELS, self.n, self.n)}")

        skips = []
        h = x
        for conv1, conv2 in self.encoders:
            h = relu(conv2(relu(conv1(h))))
            skips.append(h)
            h = max_pool2d(h)
        conv1, conv2 = self.bottleneck
        h = relu(conv2(relu(conv1(h))))

        ups = []
        for stage, (tconv, conv1, conv2) in enumerate(self.decoders, start=1):
            h = tconv(h)
            h = concat_channels([h, skips[LEVELS - stage]])
            h = relu(conv2(relu(conv1(h))))
            ups.append(h)

        if self.pyramid is None:
            return ups[-1]
        taps = []
        for stage, conv in zip(range(1, LEVELS + 1), self.pyramid):
            taps.append(upsample_nearest(relu(conv(ups[stage - 1])), 2 ** (LEVELS - stage)))
        # concatenation order: full-resolution tap first, deepest last
        return concat_channels(taps[::-1])

    def forward(self, x: Tensor) -> Tensor:
        """2-channel logit map of shape (2, N, N)."""
        return self.classifier(self.features(x))

    # -- parameters ----------------------------------------------------

    def parameters(self) -> dict[str, Tensor]:
        """Stable name -> tensor map (insertion ordered)."""
        out: dict[str, Tensor] = {}
        for lvl, (c1, c2) in enumerate(self.encoders, start=1):
            out[f"enc{lvl}.conv1.weight"] = c1.weight
            out[f"enc{lvl}.conv1.bias"] = c1.bias
            out[f"enc{lvl}.conv2.weight"] = c2.weight
            out[f"enc{lvl}.conv2.bias"] = c2.bias
        c1, c2 = self.bottleneck
        out["bottleneck.conv1.weight"] = c1.weight
        out["bottleneck.conv1.bias"] = c1.bias
        out["bottleneck.conv2.weight"] = c2.weight
        out["bottleneck.conv2.bias"] = c2.bias
        for stage, (tconv, c1, c2) in enumerate(self.decoders, start=1):
            out[f"up{stage}.tconv.weight"] = tconv.weight
            out[f"up{stage}.tconv.bias"] = tconv.bias
            out[f"up{stage}.conv1.weight"] = c1.weight
            out[f"up{stage}.conv1.bias"] = c1.bias
            out[f"up{stage}.conv2.weight"] = c2.weight
            out[f"up{stage}.conv2.bias"] = c2.bias
        if self.pyramid is not None:
            for stage, conv in enumerate(self.pyramid, start=1):
                out[f"pyramid{stage}.conv.weight"] = conv.weight
                out[f"pyramid{stage}.conv.bias"] = conv.bias
        out["classifier.weight"] = self.classifier.weight
        out["classifier.bias"] = self.classifier.bias
        return out

    def parameter_count(self) -> int:
        return sum(t.data.size for t in self.parameters().values())

    def zero_grad(self) -> None:
        for t in self.parameters().values():
            t.zero_grad()


def build_unet(n: int, base_width: int, dtype=np.float32, seed: int = 0) -> Model:
    """Plain encoder-decoder with skip concatenation and a 1x1 classifier."""
    return Model("unet", n, base_width, dilation=1, dtype=dtype, seed=seed)


def build_dilated_unet(n: int, base_width: int, dilation: int = 2,
                       dtype=np.float32, seed: int = 0) -> Model:
    """Identical topology with every 3x3 convolution dilated (same parameter count)."""
    return Model("dilated-unet", n, base_width, dilation=dilation, dtype=dtype, seed=seed)


def build_mfp_unet(n: int, base_width: int, dilation: int = 2,
                   dtype=np.float32, seed: int = 0) -> Model:
    """Dilated body plus the per-level feature pyramid feeding a 64-channel classifier."""
    return Model("mfp-unet", n, base_width, dilation=dilation, dtype=dtype, seed=seed)


def build_model(arch: str, n: int, base_width: int, dilation: int,
                dtype=np.float32, seed: int = 0) -> Model:
    if arch == "unet":
        if dilation != 1:
            raise ContractViolation("unet uses dilation 1")
        return build_unet(n, base_width, dtype=dtype, seed=seed)
    if arch == "dilated-unet":
        return build_dilated_unet(n, base_width, dilation, dtype=dtype, seed=seed)
    if arch == "mfp-unet":
        return build_mfp_unet(n, base_width, dilation, dtype=dtype, seed=seed)
    raise ContractViolation(f"unknown architecture tag {arch!r}")


def forward_segment(model: Model, image_2ch: Tensor | np.ndarray) -> np.ndarray:
    """Binary N x N mask: per-pixel argmax over the 2 logit channels,
    channel 1 being foreground."""
    if not isinstance(image_2ch, Tensor):
        image_2ch = Tensor(np.asarray(image_2ch, dtype=model.dtype))
    logits = model.forward(image_2ch)
    return np.argmax(logits.data, axis=0).astype(np.uint8)
