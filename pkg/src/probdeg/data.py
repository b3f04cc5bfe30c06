"""Unpaired HR/LR folder ingestion and reproducible random crop batching.

HR and LR crops are drawn from independent substreams, so a batch carries
no pixel correspondence between the two sides. In reproducibility mode
(synchronous sampling) a batch is a pure function of (seed, step); the
prefetching path keeps the same per-step draws but overlaps them with
compute.
"""

import logging
import os
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError

from . import seeding

log = logging.getLogger(__name__)

IMAGE_EXTS = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff", ".webp")


class DataError(RuntimeError):
    pass


def load_image(path) -> np.ndarray:
    """Load an 8-bit raster file as a float32 (3, H, W) array in [0, 1]."""
    try:
        with Image.open(path) as img:
            if img.mode in ("I", "I;16", "I;16B", "I;16L", "F"):
                raise DataError(f"{path}: unsupported {img.mode}-mode image; 8-bit input required")
            rgb = img.convert("RGB")
            arr = np.asarray(rgb, dtype=np.float32) / 255.0
    except FileNotFoundError:
        raise DataError(f"{path}: file not found") from None
    except UnidentifiedImageError:
        raise DataError(f"{path}: not a readable raster image") from None
    except OSError as exc:
        raise DataError(f"{path}: failed to read image ({exc})") from None
    return np.ascontiguousarray(arr.transpose(2, 0, 1))


def save_image(path, image) -> None:
    """Clamp a float (C, H, W) array to [0, 1] and write an 8-bit file."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[0] not in (1, 3):
        raise ValueError(f"expected a (C,H,W) image with 1 or 3 channels, got {arr.shape}")
    arr = np.clip(arr, 0.0, 1.0)
    quantized = np.round(arr * 255).astype(np.uint8).transpose(1, 2, 0)
    if quantized.shape[2] == 1:
        Image.fromarray(quantized[:, :, 0], mode="L").save(path)
    else:
        Image.fromarray(quantized, mode="RGB").save(path)


def list_images(directory) -> list[str]:
    """Sorted-lexicographic discovery of raster files for stable indexing."""
    if not os.path.isdir(directory):
        raise DataError(f"{directory}: not a directory")
    names = sorted(
        n for n in os.listdir(directory) if n.lower().endswith(IMAGE_EXTS)
    )
    return [os.path.join(directory, n) for n in names]


class _ImageCache:
    """Lazy loader with a byte-budget LRU cache."""

    def __init__(self, budget_bytes: int):
        self.budget = int(budget_bytes)
        self._store: OrderedDict[str, np.ndarray] = OrderedDict()
        self._bytes = 0

    def get(self, path: str) -> np.ndarray:
        if path in self._store:
            self._store.move_to_end(path)
            return self._store[path]
        arr = load_image(path)
        if arr.nbytes <= self.budget:
            while self._bytes + arr.nbytes > self.budget and self._store:
                _, old = self._store.popitem(last=False)
                self._bytes -= old.nbytes
            self._store[path] = arr
            self._bytes += arr.nbytes
        return arr


@dataclass
class UnpairedDataset:
    hr_paths: list[str]
    lr_paths: list[str]
    hr_crop: int = 128
    lr_crop: int = 32
    scale: int = 4
    cache_budget_bytes: int = 2 << 30
    _cache: _ImageCache = field(init=False, repr=False)
    _warned: set = field(init=False, repr=False, default_factory=set)

    def __post_init__(self):
        if self.hr_crop != self.lr_crop * self.scale:
            raise ValueError(
                f"hr_crop must equal lr_crop * scale: {self.hr_crop} != "
                f"{self.lr_crop} * {self.scale}"
            )
        if not self.hr_paths or not self.lr_paths:
            raise DataError("both HR and LR file lists must be non-empty for training")
        self._cache = _ImageCache(self.cache_budget_bytes)
        log.info(
            "unpaired dataset: %d HR files, %d LR files", len(self.hr_paths), len(self.lr_paths)
        )

    @classmethod
    def from_dirs(cls, hr_dir, lr_dir, **kwargs):
        return cls(list_images(hr_dir), list_images(lr_dir), **kwargs)

    def _draw_crop(self, paths, crop, rng, tag):
        for _ in range(len(paths) * 4):
            idx = int(rng.integers(len(paths)))
            img = self._cache.get(paths[idx])
            _, h, w = img.shape
            if h < crop or w < crop:
                if paths[idx] not in self._warned:
                    self._warned.add(paths[idx])
                    log.warning("%s smaller than %dpx %s crop, skipping", paths[idx], crop, tag)
                continue
            top = int(rng.integers(h - crop + 1))
            left = int(rng.integers(w - crop + 1))
            return img[:, top:top + crop, left:left + crop], idx
        raise DataError(f"no {tag} image is at least {crop}x{crop}")

    def sample_side(self, side: str, batch: int, master_seed: int, step: int, augment: bool):
        """One side of a batch: (batch, 3, crop, crop) tensor + source indices."""
        if side == "hr":
            paths, crop = self.hr_paths, self.hr_crop
            consumer, aug_consumer = seeding.HR_CROPS, seeding.HR_AUGMENT
        else:
            paths, crop = self.lr_paths, self.lr_crop
            consumer, aug_consumer = seeding.LR_CROPS, seeding.LR_AUGMENT
        rng = seeding.numpy_stream(master_seed, step, consumer)
        crops, indices = [], []
        for _ in range(batch):
            patch, idx = self._draw_crop(paths, crop, rng, side.upper())
            crops.append(patch)
            indices.append(idx)
        stack = np.stack(crops)
        if augment:
            arng = seeding.numpy_stream(master_seed, step, aug_consumer)
            for i in range(batch):
                if arng.integers(2):
                    stack[i] = stack[i, :, :, ::-1].copy()
                stack[i] = np.rot90(stack[i], k=int(arng.integers(4)), axes=(1, 2)).copy()
        return torch.from_numpy(np.ascontiguousarray(stack)), indices


def sample_batch(
    ds: UnpairedDataset,
    batch: int,
    master_seed: int,
    step: int = 0,
    augment: bool = False,
):
    """Draw an unpaired (hr_crops, lr_crops) batch, reproducible given seed and step."""
    hr, _ = ds.sample_side("hr", batch, master_seed, step, augment)
    lr, _ = ds.sample_side("lr", batch, master_seed, step, augment)
    return hr, lr


class BatchPrefetcher:
    """Throughput mode: overlap the next batch's disk reads with compute.

    Draws stay keyed by step, but determinism is only contractual for the
    synchronous path.
    """

    def __init__(self, ds, batch, master_seed, augment=False):
        self.ds = ds
        self.batch = batch
        self.seed = master_seed
        self.augment = augment
        self._pool = ThreadPoolExecutor(max_workers=1)
        self._pending = None
        self._pending_step = None

    def get(self, step: int):
        if self._pending is not None and self._pending_step == step:
            result = self._pending.result()
        else:
            result = sample_batch(self.ds, self.batch, self.seed, step, self.augment)
        self._pending = self._pool.submit(
            sample_batch, self.ds, self.batch, self.seed, step + 1, self.augment
        )
        self._pending_step = step + 1
        return result

    def close(self):
        self._pool.shutdown(wait=False, cancel_futures=True)
