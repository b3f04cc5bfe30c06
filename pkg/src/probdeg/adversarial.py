"""Patch discriminator and least-squares adversarial loss assembly.

The discriminator is a stack of stride-2 4x4 convolutions followed by a
1x1 scoring convolution, so each score judges a local patch and the
receptive field stays below the LR crop size. Losses follow the
least-squares objective: real targets 1, fake targets 0.
"""

import os
from dataclasses import dataclass

import torch
import torch.nn as nn

from .kernels import init_generator_weights


@dataclass
class DiscriminatorConfig:
    input_channels: int = 3
    base_width: int = 64
    num_stages: int = 3
    normalization: str = "instance"  # "instance" | "none"

    def validate(self):
        if self.num_stages < 1:
            raise ValueError(f"num_stages must be >= 1, got {self.num_stages}")
        if self.base_width < 1:
            raise ValueError(f"base_width must be >= 1, got {self.base_width}")
        if self.normalization not in ("instance", "none"):
            raise ValueError(f"unknown normalization {self.normalization!r}")


def receptive_field(num_stages: int) -> int:
    """Receptive field of the stride-2 stage stack (4x4 windows, 1x1 head)."""
    return 1 + 3 * (2 ** num_stages - 1)


def score_map_size(input_size: int, num_stages: int) -> int:
    size = input_size
    for _ in range(num_stages):
        size = (size + 2 - 4) // 2 + 1
    return size


class PatchDiscriminator(nn.Module):
    def __init__(self, cfg: DiscriminatorConfig):
        super().__init__()
        cfg.validate()
        self.cfg = cfg

        layers = []
        in_ch = cfg.input_channels
        for i in range(cfg.num_stages):
            out_ch = min(cfg.base_width * 2 ** i, cfg.base_width * 8)
            layers.append(nn.Conv2d(in_ch, out_ch, 4, stride=2, padding=1))
            if i > 0 and cfg.normalization == "instance":
                layers.append(nn.InstanceNorm2d(out_ch))
            layers.append(nn.LeakyReLU(0.2, inplace=True))
            in_ch = out_ch
        layers.append(nn.Conv2d(in_ch, 1, 1))
        self.net = nn.Sequential(*layers)
        init_generator_weights(self)

    def forward(self, patch: torch.Tensor) -> torch.Tensor:
        squeeze = patch.dim() == 3
        if squeeze:
            patch = patch.unsqueeze(0)
        out = self.net(patch)
        return out.squeeze(0) if squeeze else out


def adversarial_losses(
    real_scores: torch.Tensor | None,
    fake_scores: torch.Tensor,
    side: str,
) -> torch.Tensor:
    """Least-squares adversarial loss for one side of the game."""
    if side == "generator":
        return (fake_scores - 1.0).square().mean()
    if side == "discriminator":
        if real_scores is None:
            raise ValueError("discriminator loss needs real scores")
        if real_scores.shape != fake_scores.shape:
            raise ValueError(
                f"score shapes differ: {tuple(real_scores.shape)} vs {tuple(fake_scores.shape)}"
            )
        return (real_scores - 1.0).square().mean() + fake_scores.square().mean()
    raise ValueError(f"side must be 'generator' or 'discriminator', got {side!r}")


def total_degradation_loss(l_adv_g, l_reg, lam: float = 100.0):
    """Total degradation-model loss: adversarial term plus weighted noise energy."""
    return l_adv_g + lam * l_reg


@dataclass
class LossReport:
    step: int
    l_adv_g: float
    l_adv_d: float
    l_reg: float
    l_total: float
    sr_pixel_loss: float | None = None

    @classmethod
    def assemble(cls, step, l_adv_g, l_adv_d, l_reg, lam, sr_pixel_loss=None):
        l_adv_g = float(l_adv_g)
        l_reg = float(l_reg)
        return cls(
            step=int(step),
            l_adv_g=l_adv_g,
            l_adv_d=float(l_adv_d),
            l_reg=l_reg,
            l_total=l_adv_g + float(lam) * l_reg,
            sr_pixel_loss=None if sr_pixel_loss is None else float(sr_pixel_loss),
        )

    def is_finite(self) -> bool:
        vals = [self.l_adv_g, self.l_adv_d, self.l_reg, self.l_total]
        if self.sr_pixel_loss is not None:
            vals.append(self.sr_pixel_loss)
        return all(torch.isfinite(torch.tensor(v)).item() for v in vals)


CSV_HEADER = "step,l_adv_g,l_adv_d,l_reg,l_total,sr_pixel_loss"


class LossLog:
    """Append-only CSV log of per-step loss reports."""

    def __init__(self, path):
        self.path = path
        if not os.path.exists(path) or os.path.getsize(path) == 0:
            with open(path, "w") as fh:
                fh.write(CSV_HEADER + "\n")

    def append(self, report: LossReport):
        sr = "" if report.sr_pixel_loss is None else repr(report.sr_pixel_loss)
        row = (
            f"{report.step},{report.l_adv_g!r},{report.l_adv_d!r},"
            f"{report.l_reg!r},{report.l_total!r},{sr}"
        )
        with open(self.path, "a") as fh:
            fh.write(row + "\n")


def read_loss_log(path) -> list[LossReport]:
    reports = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected loss log header in {path}: {header!r}")
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != 6:
                continue
            step, g, d, reg, total, sr = parts
            reports.append(
                LossReport(
                    step=int(step),
                    l_adv_g=float(g),
                    l_adv_d=float(d),
                    l_reg=float(reg),
                    l_total=float(total),
                    sr_pixel_loss=float(sr) if sr else None,
                )
            )
    return reports
