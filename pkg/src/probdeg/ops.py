"""Differentiable two-step linear degradation: blur, decimate, add noise.

Conventions used throughout the package:

* Images are float tensors of shape (C, H, W) (or (B, C, H, W) batched),
  nominally valued in [0, 1]. Nothing in this module clamps; clamping to
  [0, 1] happens only when images are exported to 8-bit files, so the
  operator stays linear and differentiable.
* Blur kernels are stored flattened as (k*k, h, w): one weight column per
  spatial site, each column non-negative and summing to one. h = w = 1
  means a single kernel shared by every pixel; otherwise (h, w) must equal
  the image's (H, W) and each pixel gets its own kernel.
* The blur is a plain inner product of the reflect-padded k x k
  neighbourhood with the kernel (no kernel flip), applied per channel.
* Decimation keeps index 0 along each axis (top-left phase). The synthetic
  ground-truth pipeline uses the same phase, so learned and oracle kernels
  are directly comparable.
"""

import torch
import torch.nn.functional as F


def kernel_size_of(weights: torch.Tensor) -> int:
    """Infer the (odd) kernel side length k from a (..., k*k, h, w) field."""
    k2 = weights.shape[-3]
    k = int(round(k2 ** 0.5))
    if k * k != k2:
        raise ValueError(f"leading kernel axis {k2} is not a square number")
    if k % 2 == 0:
        raise ValueError(f"kernel size must be odd, got {k}")
    return k


def _check_image(x: torch.Tensor) -> bool:
    """Validate image rank; returns True when the input carried a batch dim."""
    if x.dim() == 3:
        return False
    if x.dim() == 4:
        return True
    raise ValueError(f"expected image of shape (C,H,W) or (B,C,H,W), got {tuple(x.shape)}")


def convolve_kernel(x: torch.Tensor, weights: torch.Tensor) -> torch.Tensor:
    """Blur an image with a (possibly per-pixel) simplex kernel field.

    x: (C, H, W) or (B, C, H, W); weights: (k*k, h, w) or (B, k*k, h, w),
    with (h, w) either (1, 1) or (H, W). Output matches the input shape and
    is differentiable w.r.t. both arguments.
    """
    batched = _check_image(x)
    if not batched:
        x = x.unsqueeze(0)
    if weights.dim() == 3:
        weights = weights.unsqueeze(0).expand(x.shape[0], -1, -1, -1)
    elif weights.dim() != 4:
        raise ValueError(f"expected kernel field of rank 3 or 4, got {tuple(weights.shape)}")
    if weights.shape[0] != x.shape[0]:
        raise ValueError(
            f"kernel batch {weights.shape[0]} does not match image batch {x.shape[0]}"
        )

    k = kernel_size_of(weights)
    pad = k // 2
    b, c, h, w = x.shape
    kh, kw = weights.shape[-2:]
    if min(h, w) <= pad:
        raise ValueError(f"image {h}x{w} too small for reflect padding of a {k}x{k} kernel")

    xp = F.pad(x, (pad, pad, pad, pad), mode="reflect")
    if (kh, kw) == (1, 1):
        # One kernel per batch element: grouped convolution, one group per
        # (batch, channel) plane.
        flt = weights.reshape(b, 1, k, k).repeat_interleave(c, dim=0)
        out = F.conv2d(xp.reshape(1, b * c, h + 2 * pad, w + 2 * pad), flt, groups=b * c)
        out = out.reshape(b, c, h, w)
    elif (kh, kw) == (h, w):
        # Per-pixel kernels: accumulate one tap at a time to keep memory flat.
        out = torch.zeros_like(x)
        for idx in range(k * k):
            di, dj = divmod(idx, k)
            out = out + xp[:, :, di:di + h, dj:dj + w] * weights[:, idx:idx + 1]
    else:
        raise ValueError(
            f"kernel field spatial size {(kh, kw)} matches neither (1,1) nor image size {(h, w)}"
        )
    return out if batched else out.squeeze(0)


def decimate(x: torch.Tensor, scale: int) -> torch.Tensor:
    """Downsample by keeping every scale-th sample, top-left phase."""
    if scale < 1:
        raise ValueError(f"scale must be a positive integer, got {scale}")
    batched = _check_image(x)
    h, w = x.shape[-2:]
    if h % scale or w % scale:
        raise ValueError(
            f"image size {h}x{w} not divisible by scale {scale}; crop the image first"
        )
    del batched
    return x[..., ::scale, ::scale]


def degrade(
    x: torch.Tensor,
    weights: torch.Tensor,
    noise: torch.Tensor | None,
    scale: int,
) -> tuple[torch.Tensor, torch.Tensor]:
    """Full degradation. Returns (y, y_clean) so callers can condition on or
    regularize the noise-free intermediate."""
    y_clean = decimate(convolve_kernel(x, weights), scale)
    if noise is None:
        return y_clean, y_clean
    if noise.shape[-3:] != y_clean.shape[-3:]:
        raise ValueError(
            f"noise shape {tuple(noise.shape)} does not match degraded image "
            f"shape {tuple(y_clean.shape)}"
        )
    return y_clean + noise, y_clean
