"""Stochastic additive-noise sampler, optionally conditioned on image content.

The latent has the LR image's spatial extent (noise is sampled per pixel),
and conditioning concatenates the clean LR image as extra input channels so
the sampler can modulate noise strength by local intensity. There is no
output nonlinearity: noise must be signed.
"""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from .kernels import CONDITIONING_MODES, init_generator_weights

_HIDDEN_WIDTH = 64
_NUM_STAGES = 4


@dataclass
class NoiseGenConfig:
    f_n: int = 3
    channels: int = 3
    conditioning: str = "image_plus_latent"
    mixing_extent: str = "spatially_correlated"  # 3x3; "independent" = 1x1
    enabled: bool = True

    def validate(self):
        if self.f_n < 1:
            raise ValueError(f"f_n must be >= 1, got {self.f_n}")
        if self.channels < 1:
            raise ValueError(f"channels must be >= 1, got {self.channels}")
        if self.conditioning not in CONDITIONING_MODES:
            raise ValueError(f"unknown conditioning {self.conditioning!r}")
        if self.mixing_extent not in ("spatially_correlated", "independent"):
            raise ValueError(f"unknown mixing_extent {self.mixing_extent!r}")


class NoiseGenerator(nn.Module):
    """netN: per-pixel latent (and optionally the clean LR image) -> noise map."""

    def __init__(self, cfg: NoiseGenConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg

        in_ch = {
            "latent_only": cfg.f_n,
            "image_only": cfg.channels,
            "image_plus_latent": cfg.f_n + cfg.channels,
        }[cfg.conditioning]
        ksize = 3 if cfg.mixing_extent == "spatially_correlated" else 1

        widths = [in_ch] + [_HIDDEN_WIDTH] * (_NUM_STAGES - 1) + [cfg.channels]
        layers = []
        for i in range(_NUM_STAGES):
            layers.append(nn.Conv2d(widths[i], widths[i + 1], ksize, padding=ksize // 2))
            if i < _NUM_STAGES - 1:
                layers.append(nn.LeakyReLU(0.2, inplace=True))
        self.net = nn.Sequential(*layers)
        init_generator_weights(self)

    def forward(
        self, z: torch.Tensor | None, y_clean: torch.Tensor | None = None
    ) -> torch.Tensor:
        cfg = self.cfg
        wants_image = cfg.conditioning in ("image_only", "image_plus_latent")
        wants_latent = cfg.conditioning in ("latent_only", "image_plus_latent")
        if wants_image and y_clean is None:
            raise ValueError(f"conditioning {cfg.conditioning!r} requires the clean LR image")
        if wants_latent and z is None:
            raise ValueError(f"conditioning {cfg.conditioning!r} requires a latent input")

        ref = z if z is not None else y_clean
        squeeze = ref.dim() == 3
        if z is not None and z.dim() == 3:
            z = z.unsqueeze(0)
        if y_clean is not None and y_clean.dim() == 3:
            y_clean = y_clean.unsqueeze(0)

        if not cfg.enabled:
            shape = (z if z is not None else y_clean).shape
            out = torch.zeros(shape[0], cfg.channels, shape[-2], shape[-1])
            return out.squeeze(0) if squeeze else out

        if z is not None and z.shape[1] != cfg.f_n:
            raise ValueError(f"latent has {z.shape[1]} channels, expected f_n={cfg.f_n}")
        if z is not None and y_clean is not None and z.shape[-2:] != y_clean.shape[-2:]:
            raise ValueError(
                f"latent spatial size {tuple(z.shape[-2:])} does not match "
                f"clean image {tuple(y_clean.shape[-2:])}"
            )

        if cfg.conditioning == "latent_only":
            inp = z
        elif cfg.conditioning == "image_only":
            inp = y_clean
        else:
            inp = torch.cat([z, y_clean], dim=1)
        out = self.net(inp)
        return out.squeeze(0) if squeeze else out


def noise_energy(n: torch.Tensor) -> torch.Tensor:
    """Mean squared entry of a noise map.

    The mean (rather than sum) convention keeps the regularizer weight
    independent of crop size and batch shape.
    """
    return n.square().mean()


def noise_to_uint8(n: torch.Tensor) -> np.ndarray:
    """Mean-shift a noise map to mid-gray for 8-bit export, (H, W, C) layout."""
    arr = n.detach().cpu().numpy()
    if arr.ndim != 3:
        raise ValueError(f"expected a (C,H,W) noise map, got {arr.shape}")
    arr = np.clip(arr + 0.5, 0.0, 1.0)
    return np.round(arr.transpose(1, 2, 0) * 255).astype(np.uint8)
