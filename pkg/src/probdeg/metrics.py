"""Full-image evaluation: PSNR and SSIM in RGB, plus shift-tolerant scoring.

Shift-tolerant scoring crops a fixed margin (border plus the shift radius)
off the reference, slides the test image over every integer shift in range,
and keeps the best PSNR and best SSIM independently.
"""

import csv
import math
import os

import numpy as np
from scipy.signal import fftconvolve

PSNR_CAP_DB = 100.0


def _as_image(a) -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError(f"expected a (C,H,W) image, got shape {arr.shape}")
    return arr


def _check_pair(a, b):
    a, b = _as_image(a), _as_image(b)
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    a, b = _check_pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, 10.0 * math.log10(peak * peak / mse))


def _gaussian_window(size: int = 11, sigma: float = 1.5) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2 * sigma ** 2))
    win = np.outer(g, g)
    return win / win.sum()


_SSIM_WINDOW = _gaussian_window()


def ssim(a, b, k1: float = 0.01, k2: float = 0.03, peak: float = 1.0) -> float:
    """Standard SSIM, 11x11 Gaussian window (sigma 1.5), per channel, averaged."""
    a, b = _check_pair(a, b)
    size = _SSIM_WINDOW.shape[0]
    if a.shape[1] < size or a.shape[2] < size:
        raise ValueError(f"image {a.shape[1]}x{a.shape[2]} smaller than the {size}px SSIM window")
    c1 = (k1 * peak) ** 2
    c2 = (k2 * peak) ** 2

    def _filter(img):
        return fftconvolve(img, _SSIM_WINDOW, mode="valid")

    vals = []
    for ch in range(a.shape[0]):
        x, y = a[ch], b[ch]
        mu_x, mu_y = _filter(x), _filter(y)
        var_x = _filter(x * x) - mu_x ** 2
        var_y = _filter(y * y) - mu_y ** 2
        cov = _filter(x * y) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
        vals.append(float(np.mean(num / den)))
    return float(np.mean(vals))


def shifted_score(sr, gt, max_shift: int = 4, border_crop: int = 16):
    """Best (psnr, ssim) over integer misalignments within +-max_shift."""
    sr, gt = _check_pair(sr, gt)
    if max_shift < 0:
        raise ValueError(f"max_shift must be >= 0, got {max_shift}")
    margin = border_crop + max_shift
    _, h, w = gt.shape
    if h - 2 * margin < 1 or w - 2 * margin < 1:
        raise ValueError(
            f"crop margin {margin} leaves no pixels of a {h}x{w} image"
        )
    gt_core = gt[:, margin:h - margin, margin:w - margin]
    best_psnr = -math.inf
    best_ssim = -math.inf
    for dy in range(-max_shift, max_shift + 1):
        for dx in range(-max_shift, max_shift + 1):
            cand = sr[:, margin + dy:h - margin + dy, margin + dx:w - margin + dx]
            best_psnr = max(best_psnr, psnr(cand, gt_core))
            best_ssim = max(best_ssim, ssim(cand, gt_core))
    return best_psnr, best_ssim


EVAL_FIELDS = ("filename", "psnr", "ssim", "shifted_psnr", "shifted_ssim")


def score_image(sr, gt, max_shift: int = 4, border_crop: int = 16) -> dict:
    s_psnr, s_ssim = shifted_score(sr, gt, max_shift, border_crop)
    return {
        "psnr": psnr(sr, gt),
        "ssim": ssim(sr, gt),
        "shifted_psnr": s_psnr,
        "shifted_ssim": s_ssim,
    }


def write_eval_csv(path, rows: list[dict]):
    """Per-image scores plus a final row of means."""
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=EVAL_FIELDS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row[k] for k in EVAL_FIELDS})
        if rows:
            means = {
                k: float(np.mean([r[k] for r in rows])) for k in EVAL_FIELDS[1:]
            }
            writer.writerow({"filename": "mean", **means})
    return path


def read_eval_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for row in csv.DictReader(fh):
            parsed = {"filename": row["filename"]}
            for k in EVAL_FIELDS[1:]:
                parsed[k] = float(row[k]) if row[k] != "" else None
            rows.append(parsed)
        return rows


def pair_folders(sr_dir, gt_dir) -> list[tuple[str, str, str]]:
    """Match files across folders by filename; returns (name, sr_path, gt_path)."""
    from .data import DataError, list_images

    sr_files = {os.path.basename(p): p for p in list_images(sr_dir)}
    gt_files = {os.path.basename(p): p for p in list_images(gt_dir)}
    common = sorted(set(sr_files) & set(gt_files))
    if not common:
        raise DataError(f"no matching filenames between {sr_dir} and {gt_dir}")
    return [(name, sr_files[name], gt_files[name]) for name in common]
