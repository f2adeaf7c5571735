from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field


@dataclass(frozen=True)
class LossWeights:
    """Weights of the total generator objective mu*(L_global + sigma*L_local) + lambda*L_gen."""

    mu: float = 0.5
    sigma: float = 5.0
    lam: float = 75.0

    def __post_init__(self):
        for name in ("mu", "sigma", "lam"):
            v = getattr(self, name)
            if not math.isfinite(v) or v <= 0:
                raise ValueError(f"loss weight {name} must be positive and finite, got {v}")
        if self.sigma <= 1:
            raise ValueError("sigma must exceed 1 so the local term outweighs the global one")
        if self.lam <= self.mu:
            raise ValueError("lambda must dominate mu")


@dataclass(frozen=True)
class ModelConfig:
    # U-Net widths: one entry per encoder level plus the bottleneck.
    generator_widths: tuple[int, ...] = (64, 128, 256, 512)
    global_channels: tuple[int, ...] = (32, 64)
    global_dense: tuple[int, ...] = (256, 64)
    local_channels: tuple[int, ...] = (32, 64, 64, 128, 128)
    local_strides: tuple[int, ...] = (1, 2, 1, 2, 1)
    local_dense: tuple[int, ...] = (512, 256, 64)
    slope: float = 0.2
    tile_size: int = 256
    patch_size: int = 32
    # "dct" feeds 64-channel coefficient grids; "pixel" is the baseline on raw pixels.
    input_domain: str = "dct"

    def __post_init__(self):
        if len(self.generator_widths) < 2:
            raise ValueError("generator needs at least one down-block and a bottleneck")
        if len(self.global_channels) != 2:
            raise ValueError("global discriminator has exactly two convolution layers")
        if len(self.global_dense) != 2:
            raise ValueError("global discriminator has three dense layers (two hidden)")
        if len(self.local_channels) != 5 or len(self.local_strides) != 5:
            raise ValueError("local discriminator has exactly five convolution layers")
        if len(self.local_dense) != 3:
            raise ValueError("local discriminator has four dense layers (three hidden)")
        if self.tile_size % self.patch_size or self.tile_size % 8:
            raise ValueError("tile size must be divisible by the patch size and by 8")
        if self.input_domain not in ("dct", "pixel"):
            raise ValueError(f"unknown input domain {self.input_domain!r}")
        grid = self.tile_size // 8 if self.input_domain == "dct" else self.tile_size
        if grid % (2 ** (len(self.generator_widths) - 1)):
            raise ValueError("generator depth does not divide the input grid")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 1
    batch_size: int = 4
    seed: int = 0
    quality: int = 50
    lr: float = 2e-4
    # Discriminator learning rate; None means the same as ``lr``.
    disc_lr: float | None = None
    beta1: float = 0.5
    beta2: float = 0.999
    focal_alpha: float = 0.25
    focal_gamma: float = 2.0
    weights: LossWeights = field(default_factory=LossWeights)
    model: ModelConfig = field(default_factory=ModelConfig)
    max_steps: int | None = None
    dtype: str = "float32"

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch size must be positive")
        if not 1 <= self.quality <= 100:
            raise ValueError("quality must lie in [1, 100]")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> TrainConfig:
        d = dict(d)
        weights = LossWeights(**d.pop("weights", {}))
        model = d.pop("model", {})
        model = ModelConfig(**{k: tuple(v) if isinstance(v, list) else v for k, v in model.items()})
        return cls(weights=weights, model=model, **d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
