"""Saliency and scanpath evaluation metrics.

Saliency side: NSS, CC, KL, AUC-Judd, shuffled AUC, and the combined
smoothness/NSS fitting loss. Scanpath side: Sequence Score over fixation
cluster strings and the four MultiMatch dimensions, plus inter-observer
agreement and component fixation-proportion analysis.
"""

import math
import warnings
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .density import Fixation, Scanpath, as_values, total_variation
from .kernels import nw_matches
from .layout import COMPONENTS, SegmentationMap

KL_EPS = 2.2e-16
EVAL_FIXATIONS = 7  # evaluation horizon for scanpath metrics
CLUSTER_BANDWIDTH_PX = 100.0  # 2 visual degrees at 50 px/degree

LAMBDA_TV = 0.7
LAMBDA_NSS = 0.3


def _fixation_pixels(salmap: np.ndarray, fixations) -> np.ndarray:
    h, w = salmap.shape
    idx = []
    for f in fixations:
        x, y = (f.x, f.y) if isinstance(f, Fixation) else (f[0], f[1])
        ix = min(int(x), w - 1)
        iy = min(int(y), h - 1)
        if not (0 <= ix < w and 0 <= iy < h):
            raise ValueError(f"fixation out of bounds: ({x}, {y})")
        idx.append((iy, ix))
    return np.array(idx, dtype=int)


def nss(salmap, fixations) -> float:
    """Mean of the z-scored saliency map at the fixated pixels."""
    v = as_values(salmap)
    if len(fixations) == 0:
        raise ValueError("no fixations")
    std = v.std()
    if std == 0:
        raise ValueError("NSS undefined: zero-variance saliency map")
    z = (v - v.mean()) / std
    idx = _fixation_pixels(v, fixations)
    return float(z[idx[:, 0], idx[:, 1]].mean())


def cc(map1, map2) -> float:
    """Pearson correlation between two maps over pixels."""
    a = as_values(map1).ravel()
    b = as_values(map2).ravel()
    if a.shape != b.shape:
        raise ValueError("map shapes differ")
    if a.std() == 0 or b.std() == 0:
        raise ValueError("CC undefined: zero-variance map")
    a = a - a.mean()
    b = b - b.mean()
    return float((a * b).sum() / np.sqrt((a * a).sum() * (b * b).sum()))


def kl(p, q, eps: float = KL_EPS) -> float:
    """KL divergence of normalized map p from normalized map q."""
    pv = as_values(p).ravel()
    qv = as_values(q).ravel()
    if pv.shape != qv.shape:
        raise ValueError("map shapes differ")
    for name, v in (("p", pv), ("q", qv)):
        if not math.isclose(v.sum(), 1.0, rel_tol=1e-6):
            raise ValueError(f"{name} is not normalized (sum={v.sum()})")
    return float((pv * np.log((pv + eps) / (qv + eps))).sum())


def _roc_area(pos_vals: np.ndarray, neg_vals: np.ndarray) -> float:
    # threshold at each positive saliency value, trapezoidal area
    if pos_vals.size == 0:
        raise ValueError("no positive fixations")
    thresholds = np.sort(np.unique(pos_vals))[::-1]
    tp = [0.0]
    fp = [0.0]
    for th in thresholds:
        tp.append((pos_vals >= th).sum() / pos_vals.size)
        fp.append((neg_vals >= th).sum() / max(neg_vals.size, 1))
    tp.append(1.0)
    fp.append(1.0)
    return float(np.trapezoid(tp, fp))


def auc_judd(salmap, fixations) -> float:
    """ROC area with fixated pixels as positives and all other pixels as
    negatives; degenerate constant maps score 0.5."""
    v = as_values(salmap)
    idx = _fixation_pixels(v, fixations)
    if np.ptp(v) == 0:
        return 0.5
    fixated = np.zeros(v.shape, dtype=bool)
    fixated[idx[:, 0], idx[:, 1]] = True
    pos = v[idx[:, 0], idx[:, 1]]
    neg = v[~fixated]
    return _roc_area(pos, neg)


def sauc(salmap, fixations, shuffle_fixations) -> float:
    """Shuffled AUC: negatives are fixations from other images."""
    v = as_values(salmap)
    idx = _fixation_pixels(v, fixations)
    if np.ptp(v) == 0:
        return 0.5
    sidx = _fixation_pixels(v, shuffle_fixations)
    fixated = set(map(tuple, idx))
    keep = [t for t in map(tuple, sidx) if t not in fixated]
    if not keep:
        raise ValueError("no shuffle fixations outside the positive set")
    neg = np.array([v[y, x] for y, x in keep])
    pos = v[idx[:, 0], idx[:, 1]]
    return _roc_area(pos, neg)


def l_total(pred, fixations) -> float:
    """Combined smoothness + inverse-NSS fitting loss (0.7 / 0.3 split)."""
    v = as_values(pred)
    total = v.sum()
    if total <= 0:
        raise ValueError("loss undefined for a zero map")
    score = nss(v, fixations)
    if score <= 0:
        raise ValueError("loss undefined for non-positive NSS")
    return LAMBDA_TV * total_variation(v / total) + LAMBDA_NSS / score


class FixationClusterer:
    """Mean-shift clustering of pooled fixation points (flat kernel).

    Fit on all human fixations for one image; predict maps any point to
    the nearest mode, giving the cluster-id alphabet for Sequence Score.
    """

    def __init__(self, bandwidth: float = CLUSTER_BANDWIDTH_PX,
                 max_iters: int = 100, tol: float = 1e-3):
        self.bandwidth = bandwidth
        self.max_iters = max_iters
        self.tol = tol
        self.modes: Optional[np.ndarray] = None

    def fit(self, points: np.ndarray) -> "FixationClusterer":
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[0] == 0:
            raise ValueError("need an (n, 2) point array")
        modes = []
        for p in points:
            x = p.copy()
            for _ in range(self.max_iters):
                d = np.linalg.norm(points - x, axis=1)
                inside = points[d <= self.bandwidth]
                new_x = inside.mean(axis=0)
                if np.linalg.norm(new_x - x) < self.tol:
                    x = new_x
                    break
                x = new_x
            modes.append(x)
        merged: List[np.ndarray] = []
        for m in modes:
            if not any(
                np.linalg.norm(m - q) < self.bandwidth / 2 for q in merged
            ):
                merged.append(m)
        self.modes = np.array(merged)
        return self

    def predict(self, points: np.ndarray) -> np.ndarray:
        if self.modes is None:
            raise ValueError("clusterer not fitted")
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        d = np.linalg.norm(points[:, None, :] - self.modes[None], axis=2)
        return np.argmin(d, axis=1)


def sequence_score(
    sp1: Scanpath,
    sp2: Scanpath,
    clusterer: FixationClusterer,
    max_fixations: int = EVAL_FIXATIONS,
) -> float:
    """Global-alignment similarity of fixation-cluster strings in [0, 1].

    Match scores 1, mismatch and gap 0; normalized by the longer string.
    """
    if len(sp1) == 0 or len(sp2) == 0:
        raise ValueError("empty scanpath")
    s1 = clusterer.predict(sp1.truncated(max_fixations).points())
    s2 = clusterer.predict(sp2.truncated(max_fixations).points())
    return nw_matches(s1, s2) / max(len(s1), len(s2))


def _saccade_vectors(sp: Scanpath, max_fixations: int) -> np.ndarray:
    pts = sp.truncated(max_fixations).points()
    return np.diff(pts, axis=0)


def _align_saccades(u: np.ndarray, v: np.ndarray) -> List[Tuple[int, int]]:
    """DP path through the vector-difference cost grid (right/down/diag
    moves), minimizing total |u_i - v_j| along the path."""
    n, m = len(u), len(v)
    cost = np.linalg.norm(u[:, None, :] - v[None, :, :], axis=2)
    acc = np.full((n, m), np.inf)
    acc[0, 0] = cost[0, 0]
    for i in range(n):
        for j in range(m):
            if i == 0 and j == 0:
                continue
            best = np.inf
            if i > 0:
                best = min(best, acc[i - 1, j])
            if j > 0:
                best = min(best, acc[i, j - 1])
            if i > 0 and j > 0:
                best = min(best, acc[i - 1, j - 1])
            acc[i, j] = cost[i, j] + best
    path = [(n - 1, m - 1)]
    i, j = n - 1, m - 1
    while (i, j) != (0, 0):
        candidates = []
        if i > 0 and j > 0:
            candidates.append((acc[i - 1, j - 1], (i - 1, j - 1)))
        if i > 0:
            candidates.append((acc[i - 1, j], (i - 1, j)))
        if j > 0:
            candidates.append((acc[i, j - 1], (i, j - 1)))
        _, (i, j) = min(candidates, key=lambda t: t[0])
        path.append((i, j))
    path.reverse()
    return path


def multimatch(
    sp1: Scanpath,
    sp2: Scanpath,
    screen_size: Tuple[float, float],
    max_fixations: int = EVAL_FIXATIONS,
) -> Dict[str, Optional[float]]:
    """Shape / direction / length / position similarities, each in [0, 1].

    Saccade-based dimensions need >= 2 fixations per path and are reported
    as None otherwise; position is always computed. No simplification
    pre-pass is applied (short evaluation horizon).
    """
    if len(sp1) == 0 or len(sp2) == 0:
        raise ValueError("empty scanpath")
    diag = math.hypot(*screen_size)
    out: Dict[str, Optional[float]] = {}

    p1 = sp1.truncated(max_fixations).points()
    p2 = sp2.truncated(max_fixations).points()
    u = np.diff(p1, axis=0)
    v = np.diff(p2, axis=0)
    if len(u) == 0 or len(v) == 0:
        out["shape"] = out["direction"] = out["length"] = None
        # align fixations positionally 1:1 up to the shorter path
        n = min(len(p1), len(p2))
        dpos = np.linalg.norm(p1[:n] - p2[:n], axis=1).mean()
        out["position"] = 1.0 - dpos / diag
        return out

    path = _align_saccades(u, v)
    shape_d = []
    dir_d = []
    len_d = []
    pos_d = []
    for i, j in path:
        shape_d.append(np.linalg.norm(u[i] - v[j]))
        a1 = math.atan2(u[i][1], u[i][0])
        a2 = math.atan2(v[j][1], v[j][0])
        delta = abs(a1 - a2) % (2 * math.pi)
        dir_d.append(min(delta, 2 * math.pi - delta))
        len_d.append(abs(np.linalg.norm(u[i]) - np.linalg.norm(v[j])))
        pos_d.append(np.linalg.norm(p1[i + 1] - p2[j + 1]))
    # shape differences can reach twice the diagonal, hence the 2x norm
    out["shape"] = 1.0 - float(np.mean(shape_d)) / (2 * diag)
    out["direction"] = 1.0 - float(np.mean(dir_d)) / math.pi
    out["length"] = 1.0 - float(np.mean(len_d)) / diag
    out["position"] = 1.0 - float(np.mean(pos_d)) / diag
    return out


def fit_fixation_clusterer(
    scanpaths: Sequence[Scanpath], bandwidth: float = CLUSTER_BANDWIDTH_PX
) -> FixationClusterer:
    """Fit the sequence-score clusterer on pooled human fixations."""
    pts = np.concatenate([sp.points() for sp in scanpaths])
    return FixationClusterer(bandwidth=bandwidth).fit(pts)


def inter_observer(
    scanpaths_by_image: Dict[str, Sequence[Scanpath]],
    screen_size: Tuple[float, float],
    bandwidth: float = CLUSTER_BANDWIDTH_PX,
    max_fixations: int = EVAL_FIXATIONS,
) -> Dict[str, float]:
    """Mean over ordered subject pairs per image of sequence score and
    multimatch; images with fewer than two subjects are skipped."""
    ss_scores = []
    mm_scores: Dict[str, List[float]] = {k: [] for k in
                                         ("shape", "direction", "length",
                                          "position")}
    for image_id, paths in sorted(scanpaths_by_image.items()):
        if len(paths) < 2:
            warnings.warn(f"image {image_id}: fewer than 2 subjects; skipped")
            continue
        clusterer = fit_fixation_clusterer(paths, bandwidth)
        for a in paths:
            for b in paths:
                if a is b:
                    continue
                ss_scores.append(
                    sequence_score(a, b, clusterer, max_fixations)
                )
                mm = multimatch(a, b, screen_size, max_fixations)
                for k, val in mm.items():
                    if val is not None:
                        mm_scores[k].append(val)
    if not ss_scores:
        raise ValueError("no image had two or more subjects")
    out = {"sequence_score": float(np.mean(ss_scores))}
    for k, vals in mm_scores.items():
        out[f"multimatch_{k}"] = float(np.mean(vals)) if vals else float("nan")
    return out


def component_fixation_proportions(
    scanpaths: Sequence[Scanpath],
    seg: SegmentationMap,
    T: int = EVAL_FIXATIONS,
    normalize_columns: bool = True,
) -> Dict[str, List[Optional[float]]]:
    """Area-discounted fraction of fixations per component at each
    fixation index 1..T; absent components are reported as None."""
    areas = {c: int(seg.component_mask(c).sum()) for c in COMPONENTS}
    counts = {c: np.zeros(T) for c in COMPONENTS}
    totals = np.zeros(T)
    for sp in scanpaths:
        for f in sp.fixations[:T]:
            t = f.index if f.index < T else None
            if t is None:
                continue
            ix = min(int(f.x), seg.width - 1)
            iy = min(int(f.y), seg.height - 1)
            totals[t] += 1
            for c in COMPONENTS:
                if seg.component_mask(c)[iy, ix]:
                    counts[c][t] += 1
    table: Dict[str, List[Optional[float]]] = {c: [] for c in COMPONENTS}
    for t in range(T):
        col = {}
        for c in COMPONENTS:
            if areas[c] == 0:
                col[c] = None
            elif totals[t] == 0:
                col[c] = 0.0
            else:
                col[c] = counts[c][t] / totals[t] / areas[c]
        if normalize_columns:
            s = sum(v for v in col.values() if v)
            if s > 0:
                col = {c: (None if v is None else v / s) for c, v in col.items()}
        for c in COMPONENTS:
            table[c].append(col[c])
    return table


@dataclass
class MetricReport:
    per_image: Dict[str, Dict[str, float]] = field(default_factory=dict)
    aggregate: Dict[str, float] = field(default_factory=dict)

    def finalize(self) -> "MetricReport":
        keys = sorted({k for row in self.per_image.values() for k in row})
        self.aggregate = {}
        for k in keys:
            vals = [
                row[k]
                for _, row in sorted(self.per_image.items())
                if k in row and row[k] is not None and np.isfinite(row[k])
            ]
            if vals:
                self.aggregate[k] = float(np.mean(vals))
        return self
