"""Pluggable SR restorers and the bicubic baseline resampler.

residual_baseline is the community-standard residual network: head conv,
N residual blocks (no batch norm), a global skip, and a sub-pixel
upsampler. deep_residual_dense swaps the body for residual-in-residual
dense blocks; same interface, heavier model.
"""

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from . import seeding

_ARCHITECTURES = ("residual_baseline", "deep_residual_dense")


@dataclass
class SrConfig:
    architecture: str = "residual_baseline"
    scale: int = 4
    num_blocks: int = 16
    width: int = 64
    sr_adversarial: bool = False

    def validate(self):
        if self.architecture not in _ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.scale < 1:
            raise ValueError(f"scale must be >= 1, got {self.scale}")
        if self.num_blocks < 1:
            raise ValueError(f"num_blocks must be >= 1, got {self.num_blocks}")


class _ResidualBlock(nn.Module):
    def __init__(self, width):
        super().__init__()
        self.body = nn.Sequential(
            nn.Conv2d(width, width, 3, padding=1),
            nn.ReLU(inplace=True),
            nn.Conv2d(width, width, 3, padding=1),
        )

    def forward(self, x):
        return x + self.body(x)


class _Upsampler(nn.Sequential):
    def __init__(self, width, scale):
        layers = []
        s = scale
        while s % 2 == 0:
            layers += [nn.Conv2d(width, width * 4, 3, padding=1), nn.PixelShuffle(2)]
            s //= 2
        if s % 3 == 0:
            layers += [nn.Conv2d(width, width * 9, 3, padding=1), nn.PixelShuffle(3)]
            s //= 3
        if s != 1:
            raise ValueError(f"scale must factor into 2s and 3s, got {scale}")
        super().__init__(*layers)


class ResidualSRNet(nn.Module):
    def __init__(self, cfg: SrConfig, channels: int = 3):
        super().__init__()
        self.cfg = cfg
        self.head = nn.Conv2d(channels, cfg.width, 3, padding=1)
        self.body = nn.Sequential(
            *[_ResidualBlock(cfg.width) for _ in range(cfg.num_blocks)],
            nn.Conv2d(cfg.width, cfg.width, 3, padding=1),
        )
        self.tail = nn.Sequential(
            _Upsampler(cfg.width, cfg.scale),
            nn.Conv2d(cfg.width, channels, 3, padding=1),
        )

    def forward(self, y):
        squeeze = y.dim() == 3
        if squeeze:
            y = y.unsqueeze(0)
        feat = self.head(y - 0.5)
        feat = feat + self.body(feat)
        out = self.tail(feat) + 0.5
        return out.squeeze(0) if squeeze else out


class _DenseBlock(nn.Module):
    def __init__(self, width, growth):
        super().__init__()
        self.convs = nn.ModuleList(
            [nn.Conv2d(width + i * growth, growth, 3, padding=1) for i in range(4)]
        )
        self.fuse = nn.Conv2d(width + 4 * growth, width, 3, padding=1)
        self.act = nn.LeakyReLU(0.2, inplace=True)

    def forward(self, x):
        feats = [x]
        for conv in self.convs:
            feats.append(self.act(conv(torch.cat(feats, dim=1))))
        return x + 0.2 * self.fuse(torch.cat(feats, dim=1))


class _RRDB(nn.Module):
    def __init__(self, width, growth):
        super().__init__()
        self.blocks = nn.Sequential(*[_DenseBlock(width, growth) for _ in range(3)])

    def forward(self, x):
        return x + 0.2 * self.blocks(x)


class DeepResidualDenseNet(nn.Module):
    def __init__(self, cfg: SrConfig, channels: int = 3):
        super().__init__()
        self.cfg = cfg
        growth = max(cfg.width // 2, 8)
        self.head = nn.Conv2d(channels, cfg.width, 3, padding=1)
        self.body = nn.Sequential(
            *[_RRDB(cfg.width, growth) for _ in range(cfg.num_blocks)],
            nn.Conv2d(cfg.width, cfg.width, 3, padding=1),
        )
        self.tail = nn.Sequential(
            _Upsampler(cfg.width, cfg.scale),
            nn.Conv2d(cfg.width, channels, 3, padding=1),
        )

    def forward(self, y):
        squeeze = y.dim() == 3
        if squeeze:
            y = y.unsqueeze(0)
        feat = self.head(y - 0.5)
        feat = feat + self.body(feat)
        out = self.tail(feat) + 0.5
        return out.squeeze(0) if squeeze else out


def build_sr_model(cfg: SrConfig, channels: int = 3) -> nn.Module:
    cfg.validate()
    if cfg.architecture == "residual_baseline":
        return ResidualSRNet(cfg, channels)
    return DeepResidualDenseNet(cfg, channels)


def init_sr_weights(module: nn.Module, seed: int | None = None, salt: int = 0):
    """He-normal conv init, reproducible when a seed is given."""
    gen = None if seed is None else seeding.torch_generator(seed, salt, seeding.PARAM_INIT)
    for m in module.modules():
        if isinstance(m, nn.Conv2d):
            fan_in = m.in_channels * m.kernel_size[0] * m.kernel_size[1]
            std = math.sqrt(2.0 / fan_in)
            with torch.no_grad():
                m.weight.normal_(0.0, std, generator=gen)
                if m.bias is not None:
                    m.bias.zero_()


def sr_pixel_loss(prediction: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error between prediction and target."""
    if prediction.shape != target.shape:
        raise ValueError(
            f"shape mismatch: prediction {tuple(prediction.shape)} vs "
            f"target {tuple(target.shape)}"
        )
    return (prediction - target).abs().mean()


# ---------------------------------------------------------------------------
# Bicubic baseline resampler (a = -0.5 convolution kernel, replicated edges).
# Downscaling stretches the kernel by the scale factor (antialiased), the
# convention used by the usual SR "Bicubic" baseline.
# ---------------------------------------------------------------------------


def _cubic(x: np.ndarray, a: float = -0.5) -> np.ndarray:
    ax = np.abs(x)
    out = np.zeros_like(ax)
    m1 = ax <= 1
    m2 = (ax > 1) & (ax < 2)
    out[m1] = (a + 2) * ax[m1] ** 3 - (a + 3) * ax[m1] ** 2 + 1
    out[m2] = a * ax[m2] ** 3 - 5 * a * ax[m2] ** 2 + 8 * a * ax[m2] - 4 * a
    return out


def _resize_matrix(n_in: int, scale: int, direction: str) -> np.ndarray:
    if direction == "up":
        n_out = n_in * scale
        centers = (np.arange(n_out) + 0.5) / scale - 0.5
        support = 2.0
        width = 1.0
    else:
        n_out = n_in // scale
        centers = (np.arange(n_out) + 0.5) * scale - 0.5
        support = 2.0 * scale
        width = float(scale)

    mat = np.zeros((n_out, n_in))
    for j, u in enumerate(centers):
        lo = int(np.floor(u - support)) + 1
        taps = np.arange(lo, lo + int(2 * support))
        w = _cubic((taps - u) / width)
        w = w / w.sum()
        np.add.at(mat[j], np.clip(taps, 0, n_in - 1), w)
    return mat


def bicubic_resize(image, scale: int, direction: str) -> np.ndarray:
    """Bicubic up/down resampling of a (C, H, W) array by an integer factor."""
    if direction not in ("up", "down"):
        raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"expected a (C,H,W) image, got shape {arr.shape}")
    if scale == 1:
        return arr.copy()
    c, h, w = arr.shape
    if direction == "down" and (h % scale or w % scale):
        raise ValueError(f"image size {h}x{w} not divisible by scale {scale}")
    mh = _resize_matrix(h, scale, direction)
    mw = _resize_matrix(w, scale, direction)
    return np.einsum("ij,cjk,lk->cil", mh, arr, mw)
