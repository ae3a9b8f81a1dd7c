"""Conditional patch discriminators at three scales and the frozen perceptual encoder."""
from __future__ import annotations

import numpy as np

from ..neuralcore import Conv2d, InstanceNorm, Module, Tensor
from ..neuralcore import ops


class PatchDiscriminator(Module):
    """4x4 convs: three stride-2 stages, one stride-1 stage, then a 1-channel logit map.

    Returns the logits and the activations of the first ``len(channels)`` layers.
    """

    def __init__(self, rng, c_in=6, channels=(16, 32, 64, 128), use_norm=True):
        self.strides = [2] * (len(channels) - 1) + [1, 1]
        chans = [c_in, *channels, 1]
        self.convs = [Conv2d(rng, chans[i], chans[i + 1], 4, stride=s, pad=2)
                      for i, s in enumerate(self.strides)]
        self.norms = [InstanceNorm(c) for c in channels[1:]] if use_norm else []

    def __call__(self, x: Tensor):
        feats = []
        h = x
        for i, conv in enumerate(self.convs[:-1]):
            h = conv(h)
            if self.norms and i > 0:
                h = self.norms[i - 1](h)
            h = ops.leaky_relu(h, 0.2)
            feats.append(h)
        return self.convs[-1](h), feats

    def receptive_field(self) -> tuple[int, int, int]:
        """(size, jump, offset): logit j sees input rows offset + j*jump .. + size - 1."""
        size, jump, offset = 1, 1, 0
        for conv, s in zip(self.convs, self.strides):
            k = conv.weight.shape[2]
            size += (k - 1) * jump
            offset -= conv.pad * jump
            jump *= s
        return size, jump, offset


class MultiScaleDiscriminator(Module):
    """D_k sees (image, condition) downsampled k - 1 times."""

    def __init__(self, seed=1, n_scales=3, c_in=6, channels=(16, 32, 64, 128), use_norm=True):
        rng = np.random.default_rng(seed)
        self.nets = [PatchDiscriminator(rng, c_in, channels, use_norm) for _ in range(n_scales)]

    @staticmethod
    def prepare(image: Tensor, condition: Tensor, scale: int) -> Tensor:
        x = ops.concat([image, condition], axis=1)
        for _ in range(scale - 1):
            x = ops.avg_downsample2x(x)
        return x

    def forward_scale(self, image: Tensor, condition: Tensor, scale: int):
        if not 1 <= scale <= len(self.nets):
            raise ValueError(f"scale must be in 1..{len(self.nets)}, got {scale}")
        return self.nets[scale - 1](self.prepare(image, condition, scale))

    def __call__(self, image: Tensor, condition: Tensor):
        return [self.forward_scale(image, condition, k) for k in range(1, len(self.nets) + 1)]


class PerceptualEncoder(Module):
    """Frozen fixed-seed random conv pyramid with one tap per stage.

    Weights are He-normal with zero bias, so activations keep their scale
    through the ReLU stack and every tap contributes to the loss.  Any module
    returning a list of feature maps from an image can stand in for it, for
    instance a pretrained backbone.
    """

    def __init__(self, seed=1234, channels=(8, 16, 32, 64), c_in=3):
        rng = np.random.default_rng(seed)
        chans = [c_in, *channels]
        self.convs = [Conv2d(rng, chans[i], chans[i + 1], 3, bias=False) for i in range(len(channels))]
        for conv in self.convs:
            fan_in = np.prod(conv.weight.shape[1:])
            conv.weight.data = (rng.standard_normal(conv.weight.shape) * np.sqrt(2.0 / fan_in)).astype(np.float32)
        self.freeze()

    def __call__(self, x: Tensor) -> list[Tensor]:
        taps = []
        h = x
        for i, conv in enumerate(self.convs):
            if i:
                h = ops.avg_downsample2x(h)
            h = ops.relu(conv(h))
            taps.append(h)
        return taps
