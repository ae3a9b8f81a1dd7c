"""Incremental spatial-transformer GAN at desk scale."""
from .discriminator import MultiScaleDiscriminator, PatchDiscriminator, PerceptualEncoder
from .generator import Generator, GeneratorConfig, STResBlock
from .losses import LossWeights, layer_weights, loss_feature_matching, loss_gan, loss_perceptual, loss_total
from .model import STGAN, frozen, to_signed, to_unit

__all__ = [
    "MultiScaleDiscriminator", "PatchDiscriminator", "PerceptualEncoder", "Generator", "GeneratorConfig",
    "STResBlock", "LossWeights", "layer_weights", "loss_feature_matching", "loss_gan", "loss_perceptual",
    "loss_total", "STGAN", "frozen", "to_signed", "to_unit",
]
