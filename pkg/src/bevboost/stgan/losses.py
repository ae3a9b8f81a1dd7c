"""Adversarial, feature-matching and perceptual losses."""
from __future__ import annotations

from dataclasses import asdict, dataclass

from ..config import format_config
from ..neuralcore import Tensor, no_grad
from ..neuralcore import ops


@dataclass(frozen=True)
class LossWeights:
    lambda_fm: float = 5.0
    lambda_vgg: float = 2.0
    n_layers_d: int = 4
    n_layers_p: int = 4
    n_scales: int = 3
    gan_mode: str = "lsgan"  # or "bce"

    def __post_init__(self):
        if min(self.lambda_fm, self.lambda_vgg) <= 0 or min(self.n_layers_d, self.n_layers_p, self.n_scales) < 1:
            raise ValueError("loss weights and layer counts must be positive")
        if self.gan_mode not in ("lsgan", "bce"):
            raise ValueError(f"unknown gan_mode {self.gan_mode!r}")

    @classmethod
    def from_dict(cls, d: dict) -> "LossWeights":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})

    def to_config(self) -> str:
        return format_config(asdict(self))


def layer_weights(n_layers: int) -> list[float]:
    """1 / w_i with w_i = 2^(l - i), i = 1..l: deeper layers count more."""
    return [1.0 / 2 ** (n_layers - i) for i in range(1, n_layers + 1)]


def loss_gan(logits_real: Tensor | None, logits_fake: Tensor, side: str, mode: str = "lsgan") -> Tensor:
    if side == "generator":
        if mode == "lsgan":
            return ops.mean_square_to(logits_fake, 1.0)
        return ops.mean_bce_logits(logits_fake, 1.0)
    if side != "discriminator":
        raise ValueError(f"side must be 'generator' or 'discriminator', got {side!r}")
    if logits_real.shape != logits_fake.shape:
        raise ValueError("real and fake logits differ in shape")
    if mode == "lsgan":
        parts = [ops.mean_square_to(logits_real, 1.0), ops.mean_square_to(logits_fake, 0.0)]
    else:
        parts = [ops.mean_bce_logits(logits_real, 1.0), ops.mean_bce_logits(logits_fake, 0.0)]
    return ops.weighted_sum(parts, [0.5, 0.5])


def _weighted_l1(feats_a, feats_b) -> Tensor:
    if len(feats_a) != len(feats_b):
        raise ValueError(f"feature lists differ in length: {len(feats_a)} vs {len(feats_b)}")
    terms = []
    for a, b in zip(feats_a, feats_b):
        if a.shape != b.shape:
            raise ValueError(f"feature shapes differ: {a.shape} vs {b.shape}")
        terms.append(ops.mean_abs_diff(a, b))
    return ops.weighted_sum(terms, layer_weights(len(terms)))


def loss_feature_matching(feats_label, feats_fake) -> Tensor:
    """Layer-weighted mean absolute difference; label features are treated as constants."""
    return _weighted_l1([f.detach() for f in feats_label], feats_fake)


def loss_perceptual(encoder, label: Tensor, fake: Tensor) -> Tensor:
    with no_grad():
        target = encoder(label)
    return _weighted_l1(target, encoder(fake))


def loss_total(gan_g, fm, vgg, gan_d, weights: LossWeights = LossWeights()) -> tuple[Tensor, Tensor]:
    """(loss_G, loss_D) from per-scale adversarial and feature-matching terms and the perceptual term."""
    gan_g, fm, gan_d = list(gan_g), list(fm), list(gan_d)
    loss_g = ops.weighted_sum(gan_g + fm + [vgg],
                              [1.0] * len(gan_g) + [weights.lambda_fm] * len(fm) + [weights.lambda_vgg])
    loss_d = ops.weighted_sum(gan_d, [1.0] * len(gan_d))
    return loss_g, loss_d
