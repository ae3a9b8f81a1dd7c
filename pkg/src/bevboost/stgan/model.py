"""Generator, discriminators and perceptual encoder wired into the two update steps."""
from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from ..geometry import BevSpec, CameraRig
from ..neuralcore import Module, Tensor, no_grad
from .discriminator import MultiScaleDiscriminator, PerceptualEncoder
from .generator import Generator, GeneratorConfig
from .losses import LossWeights, loss_feature_matching, loss_gan, loss_perceptual, loss_total


def to_signed(img: np.ndarray) -> Tensor:
    """(H, W, 3) or (N, H, W, 3) image in [0, 1] -> NCHW float32 tensor in [-1, 1]."""
    a = np.asarray(img, dtype=np.float32)
    if a.ndim == 3:
        a = a[None]
    return Tensor(np.ascontiguousarray(a.transpose(0, 3, 1, 2)) * 2 - 1)


def to_unit(t: Tensor | np.ndarray) -> np.ndarray:
    """NCHW in [-1, 1] -> (N, H, W, 3) in [0, 1]."""
    a = t.data if isinstance(t, Tensor) else t
    return np.clip((a.transpose(0, 2, 3, 1) + 1) / 2, 0, 1)


@contextmanager
def frozen(module: Module):
    """Temporarily stop gradients into a module's parameters."""
    params = [p for p in module.parameters() if p.requires_grad]
    for p in params:
        p.requires_grad = False
    try:
        yield
    finally:
        for p in params:
            p.requires_grad = True


@dataclass
class GeneratorLosses:
    total: Tensor
    gan: list
    fm: list
    vgg: Tensor
    fake: Tensor


class STGAN:
    def __init__(self, gen_cfg: GeneratorConfig, rig: CameraRig, spec: BevSpec,
                 weights: LossWeights = LossWeights(), seed: int = 0):
        self.weights = weights
        self.G = Generator(gen_cfg, rig, spec)
        self.D = MultiScaleDiscriminator(seed=seed + 1, n_scales=weights.n_scales)
        self.encoder = PerceptualEncoder(seed=seed + 2)

    def discriminator_loss(self, frontal: Tensor, ipm: Tensor, label: Tensor) -> Tensor:
        with no_grad():
            fake = self.G(frontal)
        terms = []
        for k in range(1, self.weights.n_scales + 1):
            real_logits, _ = self.D.forward_scale(label, ipm, k)
            fake_logits, _ = self.D.forward_scale(fake.detach(), ipm, k)
            terms.append(loss_gan(real_logits, fake_logits, "discriminator", self.weights.gan_mode))
        return loss_total([], [], Tensor(np.float32(0)), terms, self.weights)[1]

    def generator_loss(self, frontal: Tensor, ipm: Tensor, label: Tensor) -> GeneratorLosses:
        fake = self.G(frontal)
        gan, fm = [], []
        with frozen(self.D):
            for k in range(1, self.weights.n_scales + 1):
                with no_grad():
                    _, real_feats = self.D.forward_scale(label, ipm, k)
                fake_logits, fake_feats = self.D.forward_scale(fake, ipm, k)
                gan.append(loss_gan(None, fake_logits, "generator", self.weights.gan_mode))
                fm.append(loss_feature_matching(real_feats[:self.weights.n_layers_d],
                                                fake_feats[:self.weights.n_layers_d]))
        vgg = loss_perceptual(self.encoder, label, fake)
        total, _ = loss_total(gan, fm, vgg, [], self.weights)
        return GeneratorLosses(total, gan, fm, vgg, fake)

    def generate(self, frontal: Tensor) -> Tensor:
        with no_grad():
            return self.G(frontal)
