"""Hot numeric kernels with numba and pure-numpy implementations.

All kernels are mass/exactness sensitive inner loops: the boundary
renormalized Gaussian blur, k-means assignment, and the global sequence
alignment table. Which implementation runs is decided once at import by
DOCGAZE_BACKEND (see backend.py); both variants implement identical
contracts and are exercised against each other in the benchmark script.
"""

import numpy as np

from .backend import USING_NUMBA


def gaussian_kernel(sigma: float, truncate: float = 3.0) -> np.ndarray:
    """Normalized 1-D Gaussian, truncated at ``truncate * sigma``."""
    if sigma <= 0:
        return np.ones(1)
    radius = int(np.ceil(truncate * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def edge_mass(n: int, kern: np.ndarray) -> np.ndarray:
    """Per-source-index kernel mass that lands in-bounds on an n-wide axis.

    Dividing the source by this before a zero-padded convolution makes the
    blur conserve total mass at the image borders.
    """
    radius = kern.size // 2
    csum = np.concatenate(([0.0], np.cumsum(kern)))
    idx = np.arange(n)
    lo = np.maximum(0, radius - idx)
    hi = np.minimum(kern.size, radius + (n - idx))
    return csum[hi] - csum[lo]


def _conv1d_renorm_np(a: np.ndarray, kern: np.ndarray) -> np.ndarray:
    # shift-and-accumulate along axis 1; a is (H, W)
    w = a.shape[1]
    radius = kern.size // 2
    src = a / edge_mass(w, kern)[np.newaxis, :]
    out = np.zeros_like(a)
    for off in range(-radius, radius + 1):
        if abs(off) >= w:  # kernel wider than the axis; shift falls off
            continue
        weight = kern[off + radius]
        if off == 0:
            out += weight * src
        elif off > 0:
            out[:, off:] += weight * src[:, : w - off]
        else:
            out[:, :off] += weight * src[:, -off:]
    return out


def _kmeans_assign_np(points: np.ndarray, centers: np.ndarray):
    d2 = ((points[:, np.newaxis, :] - centers[np.newaxis, :, :]) ** 2).sum(axis=2)
    labels = np.argmin(d2, axis=1)
    wcss = float(d2[np.arange(points.shape[0]), labels].sum())
    return labels.astype(np.int64), wcss


def _nw_matches_py(a, b) -> int:
    # global alignment score with match=1, mismatch=0, gap=0
    n, m = len(a), len(b)
    prev = [0] * (m + 1)
    for i in range(1, n + 1):
        cur = [0] * (m + 1)
        for j in range(1, m + 1):
            best = prev[j - 1] + (1 if a[i - 1] == b[j - 1] else 0)
            if prev[j] > best:
                best = prev[j]
            if cur[j - 1] > best:
                best = cur[j - 1]
            cur[j] = best
        prev = cur
    return prev[m]


if USING_NUMBA:
    from numba import njit

    @njit(cache=True)
    def _conv1d_renorm_nb(a, kern, z):
        h, w = a.shape
        radius = kern.size // 2
        out = np.zeros_like(a)
        for y in range(h):
            for i in range(w):
                s = a[y, i]
                if s == 0.0:
                    continue
                s /= z[i]
                lo = i - radius
                if lo < 0:
                    lo = 0
                hi = i + radius + 1
                if hi > w:
                    hi = w
                for j in range(lo, hi):
                    out[y, j] += s * kern[j - i + radius]
        return out

    @njit(cache=True)
    def _kmeans_assign_nb(points, centers):
        n, d = points.shape
        k = centers.shape[0]
        labels = np.empty(n, dtype=np.int64)
        wcss = 0.0
        for i in range(n):
            best = -1
            best_d2 = np.inf
            for c in range(k):
                d2 = 0.0
                for j in range(d):
                    diff = points[i, j] - centers[c, j]
                    d2 += diff * diff
                if d2 < best_d2:
                    best_d2 = d2
                    best = c
            labels[i] = best
            wcss += best_d2
        return labels, wcss

    @njit(cache=True)
    def _nw_matches_nb(a, b):
        n = a.size
        m = b.size
        prev = np.zeros(m + 1, dtype=np.int64)
        cur = np.zeros(m + 1, dtype=np.int64)
        for i in range(1, n + 1):
            cur[0] = 0
            for j in range(1, m + 1):
                best = prev[j - 1]
                if a[i - 1] == b[j - 1]:
                    best += 1
                if prev[j] > best:
                    best = prev[j]
                if cur[j - 1] > best:
                    best = cur[j - 1]
                cur[j] = best
            prev, cur = cur, prev
        return prev[m]

    def conv1d_renorm(a, kern):
        return _conv1d_renorm_nb(
            np.ascontiguousarray(a, dtype=np.float64),
            np.ascontiguousarray(kern, dtype=np.float64),
            edge_mass(a.shape[1], kern),
        )

    def kmeans_assign(points, centers):
        labels, wcss = _kmeans_assign_nb(
            np.ascontiguousarray(points, dtype=np.float64),
            np.ascontiguousarray(centers, dtype=np.float64),
        )
        return labels, float(wcss)

    def nw_matches(a, b):
        return int(
            _nw_matches_nb(
                np.asarray(a, dtype=np.int64), np.asarray(b, dtype=np.int64)
            )
        )

else:
    def conv1d_renorm(a, kern):
        return _conv1d_renorm_np(np.asarray(a, dtype=np.float64), kern)

    def kmeans_assign(points, centers):
        return _kmeans_assign_np(
            np.asarray(points, dtype=np.float64),
            np.asarray(centers, dtype=np.float64),
        )

    def nw_matches(a, b):
        return _nw_matches_py(list(a), list(b))


def gaussian_blur(values: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur that conserves total mass at the borders.

    sigma == 0 returns an unblurred copy.
    """
    values = np.asarray(values, dtype=np.float64)
    if sigma <= 0:
        return values.copy()
    kern = gaussian_kernel(sigma)
    out = conv1d_renorm(values, kern)
    out = conv1d_renorm(out.T, kern).T
    return np.ascontiguousarray(out)


def block_mean(values: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Downsample by averaging equal blocks; shape must divide evenly."""
    h, w = values.shape
    if h % rows or w % cols:
        raise ValueError(f"shape {values.shape} not divisible into {rows}x{cols}")
    return values.reshape(rows, h // rows, cols, w // cols).mean(axis=(1, 3))


def resize_bilinear(values: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample treating samples as pixel centers."""
    values = np.asarray(values, dtype=np.float64)
    h, w = values.shape
    if (h, w) == (out_h, out_w):
        return values.copy()
    ys = (np.arange(out_h) + 0.5) * h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * w / out_w - 0.5
    ys = np.clip(ys, 0, h - 1)
    xs = np.clip(xs, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, np.newaxis]
    fx = (xs - x0)[np.newaxis, :]
    tl = values[np.ix_(y0, x0)]
    tr = values[np.ix_(y0, x1)]
    bl = values[np.ix_(y1, x0)]
    br = values[np.ix_(y1, x1)]
    return (
        tl * (1 - fy) * (1 - fx)
        + tr * (1 - fy) * fx
        + bl * fy * (1 - fx)
        + br * fy * fx
    )
