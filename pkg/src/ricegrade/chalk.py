"""Chalky-region segmentation with K-means, per-grain chalk ratio, sample
chalkiness and the brightness sweep."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .imgproc import DEFAULT_GAINS, GrayImage, adjust_brightness
from .segmentation import Grain

DEFAULT_RHO = 1.15
DEFAULT_EPS = 1e-6
DEFAULT_MAX_ITER = 100


@dataclass
class ClusterResult:
    centers: np.ndarray
    assignments: np.ndarray
    sse_history: list[float]
    iterations: int
    converged: bool


def kmeans(values, k: int, eps: float = DEFAULT_EPS, max_iter: int = DEFAULT_MAX_ITER,
           seed: int = 0) -> ClusterResult:
    """Lloyd's algorithm on scalar intensities.

    Centers start at ``k`` distinct input values drawn with ``seed``. Ties in
    the assignment step go to the lowest cluster index. A cluster that loses
    all its members keeps its previous center.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise ValueError("kmeans needs at least one value")
    if k < 1:
        raise ValueError("k must be >= 1")
    if not eps > 0:
        raise ValueError("eps must be positive")
    distinct = np.unique(x)
    if k > distinct.size:
        raise ValueError(f"k={k} exceeds the {distinct.size} distinct values")

    rng = np.random.default_rng(seed)
    centers = np.sort(rng.choice(distinct, size=k, replace=False))
    sse_history: list[float] = []
    assign = np.zeros(x.size, dtype=np.intp)
    converged = False
    it = 0
    while it < max_iter:
        it += 1
        assign = np.argmin((x[:, None] - centers[None, :]) ** 2, axis=1)
        sums = np.bincount(assign, weights=x, minlength=k)
        counts = np.bincount(assign, minlength=k)
        new = np.where(counts > 0, sums / np.maximum(counts, 1), centers)
        sse_history.append(float(((x - new[assign]) ** 2).sum()))
        shift = float(np.abs(new - centers).max())
        centers = new
        if shift < eps:
            converged = True
            break
    return ClusterResult(centers, assign, sse_history, it, converged)


@dataclass
class ChalkMask:
    mask: np.ndarray = field(repr=False)  # bool, aligned with grain.pixel_indices
    chalky_px: int
    pixel_count: int
    threshold: float
    center: float

    @property
    def ratio(self) -> float:
        return self.chalky_px / self.pixel_count if self.pixel_count else 0.0


def chalk_threshold(intensities, rho: float = DEFAULT_RHO, eps: float = DEFAULT_EPS,
                    max_iter: int = DEFAULT_MAX_ITER, seed: int = 0) -> tuple[float, float]:
    """Single-cluster K-means center of the grain intensities and ``T = center * rho``."""
    result = kmeans(intensities, 1, eps, max_iter, seed)
    center = float(result.centers[0])
    return center, center * rho


def segment_chalk(grain: Grain, img: GrayImage, rho: float = DEFAULT_RHO, eps: float = DEFAULT_EPS,
                  max_iter: int = DEFAULT_MAX_ITER, seed: int = 0, k: int = 1,
                  threshold: float | None = None) -> ChalkMask:
    """Mark a grain's chalky pixels.

    With ``k == 1`` a pixel is chalky when its intensity reaches ``T``. For
    ``k > 1`` whole clusters are marked: a cluster is chalky when its center
    reaches ``T``. ``threshold`` pins ``T`` instead of deriving it.
    """
    values = grain.intensities(img).astype(np.float64)
    if k == 1:
        center, t = chalk_threshold(values, rho, eps, max_iter, seed)
        if threshold is not None:
            t = float(threshold)
        mask = values >= t
    else:
        center = float(values.mean())
        t = center * rho if threshold is None else float(threshold)
        result = kmeans(values, k, eps, max_iter, seed)
        mask = result.centers[result.assignments] >= t
    return ChalkMask(mask, int(mask.sum()), int(values.size), float(t), center)


@dataclass(frozen=True)
class Chalkiness:
    chalky_size: float  # W_D, mean chalk ratio of the chalky grains
    n_chalky: int  # n1
    n_total: int  # n0
    chalkiness: float  # D

    def to_dict(self) -> dict:
        return {"W_D": self.chalky_size, "n1": self.n_chalky, "n0": self.n_total, "D": self.chalkiness}


def chalkiness(ratios, chalky_grain_min_ratio: float = 0.01) -> Chalkiness:
    """``D = W_D * n1 / n0`` over per-grain chalk ratios.

    Items may be floats, ChalkMask objects or ``(grain, ChalkMask)`` pairs.
    """
    ratios = [_ratio_of(r) for r in ratios]
    if not ratios:
        raise ValueError("chalkiness needs at least one grain")
    chalky = [r for r in ratios if r >= chalky_grain_min_ratio]
    n1, n0 = len(chalky), len(ratios)
    w_d = sum(chalky) / n1 if n1 else 0.0
    return Chalkiness(w_d, n1, n0, w_d * n1 / n0)


def _ratio_of(item) -> float:
    if isinstance(item, tuple):
        item = item[-1]
    return item.ratio if isinstance(item, ChalkMask) else float(item)


def chalkiness_from_counts(w_d: float, n1: int, n0: int) -> float:
    if n0 < 1:
        raise ValueError("n0 must be >= 1")
    if not 0 <= n1 <= n0:
        raise ValueError("n1 must be in 0..n0")
    return w_d * n1 / n0


def luminance_sweep(img: GrayImage, grain: Grain, rho: float = DEFAULT_RHO, eps: float = DEFAULT_EPS,
                    max_iter: int = DEFAULT_MAX_ITER, seed: int = 0,
                    gains=DEFAULT_GAINS) -> list[tuple[int, float]]:
    """Chalk ratio at each brightness level with ``T`` frozen at its level-1 value."""
    base = segment_chalk(grain, img, rho, eps, max_iter, seed)
    rows = [(1, base.ratio)]
    for level in range(2, len(gains) + 1):
        brighter = adjust_brightness(img, level, gains)
        rows.append((level, segment_chalk(grain, brighter, threshold=base.threshold).ratio))
    return rows


def is_non_decreasing(values) -> bool:
    values = list(values)
    return all(b >= a for a, b in zip(values, values[1:]))
