"""Training configuration.

A config file groups keys under ``[train]``, ``[stgan]`` (generator) and
``[loss]``.  Relative paths are resolved against the config file's directory.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

from ..config import coerce, format_config, read_config, section
from ..stgan import GeneratorConfig, LossWeights

# Reference-scale settings the desk defaults depart from: (name, reference, desk getter).
REFERENCE = [
    ("epochs", 200, lambda c: c.epochs),
    ("bottleneck feature maps", 512, lambda c: c.generator.channels[-1]),
    ("input resolution", "full camera resolution", lambda c: f"{c.generator.in_width}x{c.generator.in_height}"),
    ("perceptual encoder", "pretrained ImageNet VGG", lambda c: "fixed random conv encoder"),
    ("decoder upsampling", "transposed convolution", lambda c: "nearest upsample + conv"),
]


@dataclass(frozen=True)
class TrainConfig:
    manifest: str
    out_dir: str = "run"
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 1
    epochs: int = 20
    max_iterations: int = 0  # 0: no cap beyond the epoch count
    seed: int = 0
    checkpoint_every: int = 0  # iterations between checkpoints, 0: final only
    eval_every: int = 100  # iterations between held-out L1 evaluations, 0: start and end only
    eval_scenes: int = 0  # held-out scenes used for the logged L1, 0: all
    resume: str = ""  # checkpoint written at an epoch boundary to continue from
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    losses: LossWeights = field(default_factory=LossWeights)

    def __post_init__(self):
        if self.lr < 0 or not 0 <= self.beta1 < 1 or not 0 <= self.beta2 < 1:
            raise ValueError("lr must be non-negative and betas in [0, 1)")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        for name in ("epochs", "max_iterations", "checkpoint_every", "eval_every", "eval_scenes"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if self.generator.seed != self.seed:
            object.__setattr__(self, "generator", replace(self.generator, seed=self.seed))

    @classmethod
    def from_sections(cls, cfg: dict, base: Path | None = None, **overrides) -> "TrainConfig":
        train = {k: coerce(v) for k, v in section(cfg, "train").items()}
        gen = GeneratorConfig.from_dict({k: coerce(v) for k, v in section(cfg, "stgan").items()})
        loss = LossWeights.from_dict({k: coerce(v) for k, v in section(cfg, "loss").items()})
        train.update({k: v for k, v in overrides.items() if v is not None})
        unknown = set(train) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown [train] keys: {sorted(unknown)}")
        if "manifest" not in train:
            raise ValueError("[train] needs a manifest path")
        for key in ("manifest", "out_dir", "resume"):
            if train.get(key) and base is not None and not Path(str(train[key])).is_absolute():
                train[key] = str(base / str(train[key]))
        for key in ("lr", "beta1", "beta2"):
            if key in train:
                train[key] = float(train[key])
        return cls(generator=gen, losses=loss, **train)

    @classmethod
    def from_file(cls, path, **overrides) -> "TrainConfig":
        return cls.from_sections(read_config(path), Path(path).parent, **overrides)

    def to_config(self) -> str:
        train = {k: v for k, v in asdict(self).items() if k not in ("generator", "losses")}
        return "\n".join([format_config(train, "train"),
                          format_config(asdict(self.generator), "stgan"),
                          format_config(asdict(self.losses), "loss")])

    def deviations(self) -> list[str]:
        out = []
        for name, ref, get in REFERENCE:
            used = get(self)
            if used != ref:
                out.append(f"{name}: {used} (reference setup: {ref})")
        return out
