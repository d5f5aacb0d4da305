"""Fixation-density maps, dwell maps, and map functionals.

Maps are built by bilinear splatting of (sub-pixel) fixation locations
followed by a border-renormalized Gaussian blur, so the pre-normalization
mass of a map always equals the deposited mass (fixation count, or summed
dwell time).
"""

from dataclasses import dataclass, replace
from typing import Dict, Iterable, Optional, Sequence

import numpy as np

from .kernels import gaussian_blur

DEFAULT_SIGMA = 25.0  # px; 50 px per visual degree, half a degree of blur


@dataclass(frozen=True)
class Fixation:
    x: float
    y: float
    duration_ms: float = 0.0
    index: int = 0

    def __post_init__(self):
        if self.duration_ms < 0:
            raise ValueError(f"negative duration {self.duration_ms}")


@dataclass(frozen=True)
class Scanpath:
    image_id: str
    subject_id: str
    fixations: tuple

    def __post_init__(self):
        object.__setattr__(self, "fixations", tuple(self.fixations))
        idx = [f.index for f in self.fixations]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("fixation indices must be strictly increasing")

    def __len__(self):
        return len(self.fixations)

    def truncated(self, n: int) -> "Scanpath":
        return replace(self, fixations=self.fixations[:n])

    def points(self) -> np.ndarray:
        return np.array([[f.x, f.y] for f in self.fixations], dtype=np.float64)


@dataclass(frozen=True)
class DensityMap:
    values: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2:
            raise ValueError("density map must be 2-D")
        if np.any(v < 0):
            raise ValueError("density map values must be non-negative")
        object.__setattr__(self, "values", v)
        if self.normalized:
            total = v.sum()
            if not np.isclose(total, 1.0, rtol=1e-9, atol=0):
                raise ValueError(f"map flagged normalized but sums to {total}")

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    def sum(self) -> float:
        return float(self.values.sum())

    def normalize(self) -> "DensityMap":
        total = self.values.sum()
        if total <= 0:
            raise ValueError("cannot normalize a zero map")
        return DensityMap(self.values / total, normalized=True)

    def __array__(self, dtype=None):
        return self.values if dtype is None else self.values.astype(dtype)


def as_values(m) -> np.ndarray:
    """Accept a DensityMap or a bare array."""
    if isinstance(m, DensityMap):
        return m.values
    return np.asarray(m, dtype=np.float64)


def splat(
    fixations: Sequence[Fixation],
    width: int,
    height: int,
    weights: Optional[Sequence[float]] = None,
) -> np.ndarray:
    """Deposit unit (or weighted) impulses by bilinear splatting."""
    out = np.zeros((height, width), dtype=np.float64)
    if weights is None:
        weights = [1.0] * len(fixations)
    for i, (f, w) in enumerate(zip(fixations, weights)):
        if not (0 <= f.x < width and 0 <= f.y < height):
            raise ValueError(f"fixation {i} out of bounds: ({f.x}, {f.y})")
        x0 = min(int(np.floor(f.x)), width - 1)
        y0 = min(int(np.floor(f.y)), height - 1)
        fx = f.x - x0
        fy = f.y - y0
        x1 = min(x0 + 1, width - 1)
        y1 = min(y0 + 1, height - 1)
        out[y0, x0] += w * (1 - fx) * (1 - fy)
        out[y0, x1] += w * fx * (1 - fy)
        out[y1, x0] += w * (1 - fx) * fy
        out[y1, x1] += w * fx * fy
    return out


def build_fdm(
    fixations: Sequence[Fixation],
    width: int,
    height: int,
    sigma: float = DEFAULT_SIGMA,
    normalize: bool = True,
) -> DensityMap:
    """Fixation-density map: blurred sum of unit impulses.

    Pre-normalization mass equals len(fixations); pass normalize=False to
    keep it.
    """
    if not fixations:
        raise ValueError("no fixations")
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    raw = gaussian_blur(splat(fixations, width, height), sigma)
    m = DensityMap(raw)
    return m.normalize() if normalize else m


def component_fdm(gt_fdm, mask, sigma: float, normalize: bool = True) -> DensityMap:
    """Blur of the ground-truth map restricted to one component mask.

    A component absent from the page yields the zero map (never an error);
    normalize is skipped for zero maps.
    """
    gt = as_values(gt_fdm)
    mask = np.asarray(mask)
    if mask.shape != gt.shape:
        raise ValueError(f"mask shape {mask.shape} != map shape {gt.shape}")
    masked = gt * (mask > 0)
    out = DensityMap(gaussian_blur(masked, sigma))
    if normalize and out.sum() > 0:
        return out.normalize()
    return out


def residual_image_fdm(
    whole_fdm, component_masks: Iterable[np.ndarray], sigma: float,
    normalize: bool = True,
) -> DensityMap:
    """Blur of the whole-page map with all component regions masked out."""
    whole = as_values(whole_fdm)
    union = np.zeros(whole.shape, dtype=bool)
    for mask in component_masks:
        mask = np.asarray(mask)
        if mask.shape != whole.shape:
            raise ValueError(f"mask shape {mask.shape} != map shape {whole.shape}")
        union |= mask > 0
    return component_fdm(whole, ~union, sigma, normalize=normalize)


def dwell_map(
    fixations: Sequence[Fixation], width: int, height: int,
    sigma: float = DEFAULT_SIGMA,
) -> DensityMap:
    """Duration-weighted density map; keeps raw millisecond mass."""
    if not fixations:
        raise ValueError("no fixations")
    durations = [f.duration_ms for f in fixations]
    if sum(durations) <= 0:
        raise ValueError("degenerate dwell data: all durations zero")
    raw = gaussian_blur(splat(fixations, width, height, weights=durations), sigma)
    return DensityMap(raw)


def fdm_entropy(m) -> float:
    """Shannon entropy of the normalized map, in bits."""
    v = as_values(m)
    total = v.sum()
    if total <= 0:
        raise ValueError("entropy undefined for a zero map")
    p = v[v > 0] / total
    return float(-(p * np.log2(p)).sum())


def total_variation(m) -> float:
    """Anisotropic total variation: summed absolute forward differences."""
    v = as_values(m)
    return float(
        np.abs(np.diff(v, axis=0)).sum() + np.abs(np.diff(v, axis=1)).sum()
    )


def fixation_dwell_difference(
    fdm, dwell, masks: Dict[str, np.ndarray]
) -> Dict[str, Optional[float]]:
    """Per-component mean absolute difference between two normalized maps.

    Zero-area components are reported as None (absent), not zero.
    """
    f = as_values(fdm)
    d = as_values(dwell)
    if f.shape != d.shape:
        raise ValueError("map shapes differ")
    out: Dict[str, Optional[float]] = {}
    absdiff = np.abs(f - d)
    for name, mask in masks.items():
        mask = np.asarray(mask) > 0
        if mask.shape != f.shape:
            raise ValueError(f"mask {name!r} shape mismatch")
        area = int(mask.sum())
        out[name] = None if area == 0 else float(absdiff[mask].sum() / area)
    return out
