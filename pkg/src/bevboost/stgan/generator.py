"""Generator: encoder, a bottleneck of spatial-transformer ResNet blocks, decoder.

Each bottleneck block warps the feature map by one step of the incremental
frontal-to-BEV decomposition (refined by a small localization head) and then
sharpens it with a residual body.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..config import format_config
from ..geometry import BevSpec, CameraRig, decompose_incremental
from ..neuralcore import Conv2d, InstanceNorm, Linear, Module, Tensor
from ..neuralcore import ops


@dataclass(frozen=True)
class GeneratorConfig:
    n_st_res: int = 6
    n_downsample: int = 4
    n_upsample: int = 4
    base_channels: int = 16
    max_channels: int = 128
    in_width: int = 128
    in_height: int = 96
    out_width: int = 128
    out_height: int = 96
    loc_channels: int = 32
    pert_step: float = 0.1
    zero_init_residual: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.n_downsample != self.n_upsample:
            raise ValueError("n_downsample must equal n_upsample")
        f = 2 ** self.n_downsample
        for name in ("in_width", "in_height", "out_width", "out_height"):
            if getattr(self, name) % f:
                raise ValueError(f"{name}={getattr(self, name)} is not divisible by {f}")
        if min(self.n_st_res, self.base_channels, self.loc_channels) < 1:
            raise ValueError("n_st_res, base_channels and loc_channels must be positive")

    @property
    def channels(self) -> list[int]:
        """Feature channels after the stem and after each downsampling stage."""
        return [min(self.base_channels * 2 ** i, self.max_channels) for i in range(self.n_downsample + 1)]

    @property
    def bottleneck_in(self) -> tuple[int, int]:
        f = 2 ** self.n_downsample
        return self.in_width // f, self.in_height // f

    @property
    def bottleneck_out(self) -> tuple[int, int]:
        f = 2 ** self.n_downsample
        return self.out_width // f, self.out_height // f

    @classmethod
    def from_dict(cls, d: dict) -> "GeneratorConfig":
        known = cls.__dataclass_fields__
        return cls(**{k: d[k] for k in known if k in d})

    def to_config(self) -> str:
        return format_config(asdict(self))


class ConvNormRelu(Module):
    def __init__(self, rng, c_in, c_out, k=3, stride=1):
        self.conv = Conv2d(rng, c_in, c_out, k, stride=stride, bias=False)
        self.norm = InstanceNorm(c_out)

    def __call__(self, x):
        return ops.relu(self.norm(self.conv(x)))


class ResnetBody(Module):
    """conv-norm-relu-conv-norm plus skip.  A zero final gain makes it the identity."""

    def __init__(self, rng, channels, zero_init=True):
        self.conv1 = Conv2d(rng, channels, channels, 3, bias=False)
        self.norm1 = InstanceNorm(channels)
        self.conv2 = Conv2d(rng, channels, channels, 3, bias=False)
        self.norm2 = InstanceNorm(channels, gain=0.0 if zero_init else 1.0)

    def __call__(self, x):
        h = ops.relu(self.norm1(self.conv1(x)))
        return ops.add(x, self.norm2(self.conv2(h)))


class LocalizationHead(Module):
    """Two convs, global pooling and a zero-initialized linear layer -> 8 perturbation values."""

    def __init__(self, rng, channels, hidden):
        self.conv1 = Conv2d(rng, channels, hidden, 3)
        self.conv2 = Conv2d(rng, hidden, hidden, 3)
        self.fc = Linear(rng, hidden, 8, zero=True)

    def __call__(self, x):
        h = ops.relu(self.conv2(ops.relu(self.conv1(x))))
        return self.fc(ops.global_avg_pool(h))


class STResBlock(Module):
    def __init__(self, rng, channels, m_ref, out_size, cfg: GeneratorConfig):
        self.m_ref = np.asarray(m_ref, dtype=np.float64)  # frozen, not a parameter
        self.out_w, self.out_h = out_size
        self.step = cfg.pert_step
        self.loc = LocalizationHead(rng, channels, cfg.loc_channels)
        self.body = ResnetBody(rng, channels, cfg.zero_init_residual)

    def transform(self, x: Tensor) -> Tensor:
        """Effective per-sample homography M_ref @ M_pert, shape (N, 3, 3)."""
        return ops.perturbed_homography(self.loc(x), self.m_ref, self.step)

    def __call__(self, x, return_transform=False):
        m = self.transform(x)
        y = self.body(ops.homography_warp(x, m, self.out_h, self.out_w))
        return (y, m) if return_transform else y


class Generator(Module):
    def __init__(self, cfg: GeneratorConfig, rig: CameraRig, spec: BevSpec):
        if (rig.width, rig.height) != (cfg.in_width, cfg.in_height):
            raise ValueError(f"rig image {rig.width}x{rig.height} does not match the generator input "
                             f"{cfg.in_width}x{cfg.in_height}")
        if (spec.width, spec.height) != (cfg.out_width, cfg.out_height):
            raise ValueError(f"BEV raster {spec.width}x{spec.height} does not match the generator output "
                             f"{cfg.out_width}x{cfg.out_height}")
        self.cfg = cfg
        rng = np.random.default_rng(cfg.seed)
        ch = cfg.channels
        self.stem = ConvNormRelu(rng, 3, ch[0], k=7)
        self.down = [ConvNormRelu(rng, ch[i], ch[i + 1], stride=2) for i in range(cfg.n_downsample)]
        self.references = decompose_incremental(rig, spec, cfg.n_st_res)
        self.blocks = [STResBlock(rng, ch[-1], m, cfg.bottleneck_out, cfg) for m in self.references]
        rev = ch[::-1]
        self.up = [ConvNormRelu(rng, rev[i], rev[i + 1]) for i in range(cfg.n_upsample)]
        self.head = Conv2d(rng, ch[0], 3, 3)

    def encode(self, x: Tensor) -> Tensor:
        h = self.stem(x)
        for layer in self.down:
            h = layer(h)
        return h

    def bottleneck(self, h: Tensor, return_transforms=False):
        transforms = []
        for block in self.blocks:
            h, m = block(h, return_transform=True)
            transforms.append(m)
        return (h, transforms) if return_transforms else h

    def decode(self, h: Tensor) -> Tensor:
        for layer in self.up:
            h = layer(ops.nearest_upsample2x(h))
        return ops.tanh_out(self.head(h))

    def __call__(self, x: Tensor, return_transforms=False):
        """x: (N, 3, H, W) in [-1, 1] -> BEV (N, 3, H', W') in [-1, 1]."""
        expect = (3, self.cfg.in_height, self.cfg.in_width)
        if tuple(x.shape[1:]) != expect:
            raise ValueError(f"generator input shape {x.shape[1:]} != {expect}")
        h, transforms = self.bottleneck(self.encode(x), return_transforms=True)
        out = self.decode(h)
        return (out, transforms) if return_transforms else out

    def parameter_groups(self) -> dict[str, list[Tensor]]:
        groups = {"encoder": self.stem.parameters() + [p for m in self.down for p in m.parameters()],
                  "decoder": self.head.parameters() + [p for m in self.up for p in m.parameters()]}
        for i, block in enumerate(self.blocks):
            groups[f"loc{i}"] = block.loc.parameters()
            groups[f"res{i}"] = block.body.parameters()
        return groups
