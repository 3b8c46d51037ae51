"""Grayscale preprocessing chain: luma conversion, contrast remap, brightness
levels, binarization, small-region removal and median filtering.

Images are 2-D numpy arrays (row-major, ``pixels[row, col]``) carried together
with their mm-per-pixel calibration. Every operation returns a new image of
the same size and calibration.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

DEFAULT_GAINS = (1.00, 1.25, 1.50, 1.75, 2.00)

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class EmptyImageError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class GrayImage:
    pixels: np.ndarray
    calibration_mm_per_px: float = 1.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected a 2-D raster, got shape {px.shape}")
        if px.size and (px.min() < 0 or px.max() > 255):
            raise ValueError("intensities must lie in [0, 255]")
        if not self.calibration_mm_per_px > 0:
            raise ValueError("calibration must be positive")
        object.__setattr__(self, "pixels", px.astype(np.uint8, copy=False))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def with_pixels(self, pixels) -> "GrayImage":
        return replace(self, pixels=pixels)


@dataclass(frozen=True, eq=False)
class BinaryImage:
    pixels: np.ndarray
    calibration_mm_per_px: float = 1.0

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.ndim != 2:
            raise ValueError(f"expected a 2-D raster, got shape {px.shape}")
        if not self.calibration_mm_per_px > 0:
            raise ValueError("calibration must be positive")
        object.__setattr__(self, "pixels", px.astype(bool, copy=False))

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    def with_pixels(self, pixels) -> "BinaryImage":
        return replace(self, pixels=pixels)


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=np.float64) + 0.5)


def to_grayscale(rgb, calibration_mm_per_px: float = 1.0) -> GrayImage:
    """Convert an ``(H, W, 3)`` RGB raster using 0.299/0.587/0.114 luma weights."""
    rgb = np.asarray(rgb, dtype=np.float64)
    if rgb.ndim != 3 or rgb.shape[2] < 3:
        raise ValueError(f"expected an (H, W, 3) raster, got shape {rgb.shape}")
    if rgb.shape[0] == 0 or rgb.shape[1] == 0:
        raise EmptyImageError("zero-sized image")
    luma = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    return GrayImage(np.clip(_round_half_up(luma), 0, 255), calibration_mm_per_px)


def stretch_lut(lo: int, hi: int) -> np.ndarray:
    """256-entry table mapping ``lo..hi`` linearly onto ``0..255`` (rounded half up)."""
    p = np.arange(256, dtype=np.int64)
    span = hi - lo
    # exact integer form of round((p - lo) * 255 / span)
    lut = (2 * (p - lo) * 255 + span) // (2 * span)
    return np.clip(lut, 0, 255).astype(np.uint8)


def contrast_stretch(img: GrayImage) -> GrayImage:
    if img.pixels.size == 0:
        raise EmptyImageError("zero-sized image")
    lo, hi = int(img.pixels.min()), int(img.pixels.max())
    if hi == lo:
        return img
    return img.with_pixels(stretch_lut(lo, hi)[img.pixels])


def brightness_gain(level: int, gains=DEFAULT_GAINS) -> float:
    if isinstance(level, bool) or int(level) != level or not 1 <= level <= len(gains):
        raise ValueError(f"brightness level must be an integer in 1..{len(gains)}, got {level!r}")
    return float(gains[int(level) - 1])


def adjust_brightness(img: GrayImage, level: int, gains=DEFAULT_GAINS) -> GrayImage:
    gain = brightness_gain(level, gains)
    if gain == 1.0:
        return img
    out = _round_half_up(img.pixels.astype(np.float64) * gain)
    return img.with_pixels(np.clip(out, 0, 255))


def otsu_threshold(pixels) -> int:
    """Threshold ``t`` maximising between-class variance for the split ``p < t`` / ``p >= t``.

    Ties go to the smallest ``t``. A constant image has no split; ``value + 1``
    is returned (capped at 255) so that a blank background binarizes empty.
    """
    pixels = np.asarray(pixels)
    hist = np.bincount(pixels.ravel().astype(np.int64), minlength=256).astype(np.float64)
    nonzero = np.flatnonzero(hist)
    if nonzero.size <= 1:
        value = int(nonzero[0]) if nonzero.size else 0
        return min(value + 1, 255)
    total = hist.sum()
    levels = np.arange(256, dtype=np.float64)
    # background for candidate t is levels 0..t-1
    w0 = np.concatenate(([0.0], np.cumsum(hist)[:-1]))
    s0 = np.concatenate(([0.0], np.cumsum(hist * levels)[:-1]))
    w1 = total - w0
    s1 = (hist * levels).sum() - s0
    valid = (w0 > 0) & (w1 > 0)
    between = np.zeros(256)
    m0 = np.divide(s0, w0, out=np.zeros(256), where=valid)
    m1 = np.divide(s1, w1, out=np.zeros(256), where=valid)
    between[valid] = w0[valid] * w1[valid] * (m0[valid] - m1[valid]) ** 2
    return int(np.argmax(between))


def binarize(img: GrayImage, threshold: int | None = None) -> tuple[BinaryImage, int]:
    """Foreground is ``pixel >= threshold``; Otsu picks the threshold when none is given."""
    if threshold is None:
        threshold = otsu_threshold(img.pixels)
    elif not 0 <= threshold <= 255:
        raise ValueError(f"threshold must be in [0, 255], got {threshold}")
    threshold = int(threshold)
    return BinaryImage(img.pixels >= threshold, img.calibration_mm_per_px), threshold


def remove_small_regions(img: BinaryImage, min_area_px: int = 40000) -> BinaryImage:
    """Clear every 8-connected foreground component with fewer than ``min_area_px`` pixels."""
    if min_area_px < 1:
        raise ValueError("min_area_px must be >= 1")
    if not img.pixels.any():
        return img
    labels, count = ndimage.label(img.pixels, structure=EIGHT_CONNECTED)
    sizes = np.bincount(labels.ravel(), minlength=count + 1)
    keep = sizes >= min_area_px
    keep[0] = False
    return img.with_pixels(keep[labels])


def median_filter(img, window: int = 3):
    """Window x window median with edge replication; works on gray and binary images."""
    if isinstance(window, bool) or int(window) != window or window < 3 or window % 2 == 0:
        raise ValueError(f"window must be an odd integer >= 3, got {window!r}")
    out = ndimage.median_filter(img.pixels, size=int(window), mode="nearest")
    return img.with_pixels(out)


def load_gray(path: str | Path, calibration_mm_per_px: float = 1.0) -> GrayImage:
    """Read a PNG/PGM (or anything Pillow opens) as a grayscale raster."""
    with Image.open(path) as im:
        if im.mode in ("L", "P", "1"):
            return GrayImage(np.asarray(im.convert("L")), calibration_mm_per_px)
        if im.mode in ("I;16", "I;16B", "I;16L", "I"):
            arr = np.asarray(im, dtype=np.float64)
            peak = 65535.0 if arr.max() > 255 else 255.0
            return GrayImage(np.clip(_round_half_up(arr * 255.0 / peak), 0, 255), calibration_mm_per_px)
        return to_grayscale(np.asarray(im.convert("RGB")), calibration_mm_per_px)


def save_png(pixels, path: str | Path) -> None:
    arr = np.asarray(pixels)
    if arr.dtype == bool:
        arr = arr.astype(np.uint8) * 255
    Image.fromarray(arr.astype(np.uint8)).save(path, format="PNG")
