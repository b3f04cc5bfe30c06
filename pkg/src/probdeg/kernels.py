"""Stochastic blur-kernel sampler: maps a normal latent to a simplex kernel.

The generator is a small stack of mixing convolutions ending in a Softmax
over the k*k axis, so every output column is non-negative and sums to one
by construction. In spatially invariant mode the latent (and hence all
mixing) lives on a 1x1 grid; in variant mode the latent has the image's
spatial extent and mixing can be 3x3 (spatially correlated kernels) or 1x1
(each pixel's kernel drawn independently).
"""

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from . import seeding

CONDITIONING_MODES = ("latent_only", "image_only", "image_plus_latent")
LATENT_MODES = ("standard_normal", "zeros")

_HIDDEN_WIDTH = 128
_NUM_STAGES = 5


@dataclass
class KernelGenConfig:
    f_k: int = 64
    kernel_size: int = 21
    spatial_mode: str = "invariant"        # "invariant" | "variant"
    conditioning: str = "latent_only"
    receptive_mode: str = "correlated"     # "correlated" (3x3) | "independent" (1x1)
    image_channels: int = 3

    def validate(self):
        if self.f_k < 1:
            raise ValueError(f"f_k must be >= 1, got {self.f_k}")
        if self.kernel_size % 2 == 0 or self.kernel_size < 1:
            raise ValueError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        if self.spatial_mode not in ("invariant", "variant"):
            raise ValueError(f"unknown spatial_mode {self.spatial_mode!r}")
        if self.conditioning not in CONDITIONING_MODES:
            raise ValueError(f"unknown conditioning {self.conditioning!r}")
        if self.receptive_mode not in ("correlated", "independent"):
            raise ValueError(f"unknown receptive_mode {self.receptive_mode!r}")


def sample_latent(
    shape: tuple[int, ...],
    mode: str = "standard_normal",
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Draw a latent of the given shape; "zeros" is the deterministic ablation."""
    if any(int(d) < 1 for d in shape):
        raise ValueError(f"latent shape must have positive dims, got {shape}")
    if mode == "standard_normal":
        return torch.randn(*shape, generator=generator)
    if mode == "zeros":
        return torch.zeros(*shape)
    raise ValueError(f"unknown latent mode {mode!r}")


def init_generator_weights(module: nn.Module, std: float = 0.02, seed: int | None = None):
    """Zero-mean Gaussian init for all conv weights, zero biases."""
    gen = None if seed is None else seeding.torch_generator(seed, 0, seeding.PARAM_INIT)
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            with torch.no_grad():
                m.weight.normal_(0.0, std, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()


class KernelGenerator(nn.Module):
    """netK: latent (and optionally image) -> simplex-constrained kernel field."""

    def __init__(self, cfg: KernelGenConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg

        in_ch = {
            "latent_only": cfg.f_k,
            "image_only": cfg.image_channels,
            "image_plus_latent": cfg.f_k + cfg.image_channels,
        }[cfg.conditioning]
        if cfg.spatial_mode == "variant" and cfg.receptive_mode == "correlated":
            ksize = 3
        else:
            ksize = 1

        widths = [in_ch] + [_HIDDEN_WIDTH] * (_NUM_STAGES - 1) + [cfg.kernel_size ** 2]
        layers = []
        for i in range(_NUM_STAGES):
            layers.append(nn.Conv2d(widths[i], widths[i + 1], ksize, padding=ksize // 2))
            if i < _NUM_STAGES - 1:
                layers.append(nn.LeakyReLU(0.2, inplace=True))
        self.net = nn.Sequential(*layers)
        init_generator_weights(self)

    def expected_latent_shape(self, height: int = 1, width: int = 1) -> tuple[int, int, int]:
        if self.cfg.spatial_mode == "invariant":
            return (self.cfg.f_k, 1, 1)
        return (self.cfg.f_k, height, width)

    def forward(self, z: torch.Tensor | None, image: torch.Tensor | None = None) -> torch.Tensor:
        cfg = self.cfg
        wants_image = cfg.conditioning in ("image_only", "image_plus_latent")
        wants_latent = cfg.conditioning in ("latent_only", "image_plus_latent")
        if wants_image and image is None:
            raise ValueError(f"conditioning {cfg.conditioning!r} requires an image input")
        if not wants_image and image is not None:
            raise ValueError("image input given but conditioning is latent_only")
        if wants_latent and z is None:
            raise ValueError(f"conditioning {cfg.conditioning!r} requires a latent input")

        ref = z if z is not None else image
        squeeze = ref.dim() == 3
        if z is not None and z.dim() == 3:
            z = z.unsqueeze(0)
        if image is not None and image.dim() == 3:
            image = image.unsqueeze(0)

        if z is not None:
            if z.shape[1] != cfg.f_k:
                raise ValueError(f"latent has {z.shape[1]} channels, expected f_k={cfg.f_k}")
            if cfg.spatial_mode == "invariant" and z.shape[-2:] != (1, 1):
                raise ValueError(
                    f"invariant mode expects a 1x1 latent, got {tuple(z.shape[-2:])}"
                )

        inp = z
        if wants_image:
            # Pool the image to a 1x1 descriptor so kernel shape contracts do
            # not depend on the conditioning choice.
            feat = image.mean(dim=(-2, -1), keepdim=True)
            if z is not None:
                feat = feat.expand(-1, -1, z.shape[-2], z.shape[-1])
                inp = torch.cat([z, feat], dim=1)
            elif cfg.spatial_mode == "variant":
                inp = feat.expand(-1, -1, image.shape[-2], image.shape[-1])
            else:
                inp = feat

        out = torch.softmax(self.net(inp), dim=1)
        return out.squeeze(0) if squeeze else out


def kernel_gallery(
    generator: KernelGenerator,
    count: int,
    latent_mode: str = "standard_normal",
    master_seed: int = 0,
    image: torch.Tensor | None = None,
    upscale: int = 8,
) -> tuple[torch.Tensor, np.ndarray]:
    """Sample kernels and render a per-kernel-normalized grayscale grid.

    Returns (kernels, grid) with kernels of shape (count, k, k) and grid an
    8-bit array ready for image export. Invariant-mode generators only; a
    variant field has no single k x k raster per draw.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    cfg = generator.cfg
    if cfg.spatial_mode != "invariant":
        raise ValueError("kernel_gallery requires a spatially invariant generator")

    gen = seeding.torch_generator(master_seed, 0, seeding.GALLERY)
    z = sample_latent((count, cfg.f_k, 1, 1), latent_mode, generator=gen)
    img = None
    if cfg.conditioning != "latent_only":
        if image is None:
            raise ValueError("image-conditioned generator needs an image for the gallery")
        img = image.unsqueeze(0).expand(count, -1, -1, -1) if image.dim() == 3 else image
    with torch.no_grad():
        kernels = generator(z if cfg.conditioning != "image_only" else None, img)
    k = cfg.kernel_size
    kernels = kernels.reshape(count, k, k)

    cols = int(np.ceil(np.sqrt(count)))
    rows = int(np.ceil(count / cols))
    cell = k * upscale
    grid = np.zeros((rows * (cell + 1) + 1, cols * (cell + 1) + 1), dtype=np.uint8)
    for i in range(count):
        tile = kernels[i].numpy()
        peak = tile.max()
        if peak > 0:
            tile = tile / peak
        tile = np.kron(tile, np.ones((upscale, upscale)))
        r, c = divmod(i, cols)
        top, left = r * (cell + 1) + 1, c * (cell + 1) + 1
        grid[top:top + cell, left:left + cell] = np.round(tile * 255).astype(np.uint8)
    return kernels, grid


def save_kernel_grid(path, grid: np.ndarray):
    from PIL import Image

    Image.fromarray(grid, mode="L").save(path)


def save_kernel_array(path, kernels: torch.Tensor):
    """Raw kernel dump: arrays plus a (kernel_size, count) header."""
    arr = kernels.detach().cpu().numpy()
    np.savez(path, kernels=arr, kernel_size=np.int64(arr.shape[-1]), count=np.int64(arr.shape[0]))
