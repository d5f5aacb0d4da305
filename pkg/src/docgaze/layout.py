"""Layout statistics, document clustering, and cluster-conditioned
component saliency priors.

Documents are summarized by their component area ratios, clustered with
seeded k-means++, and each cluster gets per-component mean density priors
plus non-negative combination weights fitted against ground-truth maps.
"""

import warnings
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .density import DensityMap, as_values
from .kernels import kmeans_assign, resize_bilinear

LABEL_BACKGROUND = 0
LABEL_IMAGE = 1
LABEL_TEXT = 2
LABEL_BANNER = 3
LABEL_LOGO = 4
LABEL_NAMES = {
    LABEL_BACKGROUND: "background",
    LABEL_IMAGE: "image",
    LABEL_TEXT: "text",
    LABEL_BANNER: "banner",
    LABEL_LOGO: "logo",
}

# channel order used everywhere downstream (belief states, priors, weights)
COMPONENTS = ("face", "text", "logo", "banner", "image")

# smallest, most specific regions win when source rectangles overlap
LABEL_PRECEDENCE = (LABEL_LOGO, LABEL_TEXT, LABEL_IMAGE, LABEL_BANNER,
                    LABEL_BACKGROUND)

CANONICAL_PRIOR_SIZE = (80, 128)  # (rows, cols); 4x the action grid


@dataclass(frozen=True)
class SegmentationMap:
    labels: np.ndarray
    face_mask: Optional[np.ndarray] = None

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 2:
            raise ValueError("segmentation must be 2-D")
        bad = set(np.unique(labels)) - set(LABEL_NAMES)
        if bad:
            raise ValueError(f"unknown label values: {sorted(bad)}")
        object.__setattr__(self, "labels", labels.astype(np.uint8))
        if self.face_mask is not None:
            fm = np.asarray(self.face_mask) > 0
            if fm.shape != labels.shape:
                raise ValueError("face mask shape mismatch")
            object.__setattr__(self, "face_mask", fm)

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    def component_mask(self, name: str) -> np.ndarray:
        """Binary mask for one of the COMPONENTS (face uses face_mask)."""
        if name == "face":
            if self.face_mask is None:
                return np.zeros(self.labels.shape, dtype=bool)
            return self.face_mask
        label = {"image": LABEL_IMAGE, "text": LABEL_TEXT,
                 "banner": LABEL_BANNER, "logo": LABEL_LOGO}[name]
        return self.labels == label


def seg_stats(seg: SegmentationMap) -> np.ndarray:
    """Component area ratios [image, text, banner, background].

    Logo pixels keep their winning label and are excluded, so the vector
    sums to 1 minus the logo ratio.
    """
    total = seg.labels.size
    if total == 0:
        raise ValueError("zero-area segmentation")
    return np.array(
        [
            (seg.labels == LABEL_IMAGE).sum() / total,
            (seg.labels == LABEL_TEXT).sum() / total,
            (seg.labels == LABEL_BANNER).sum() / total,
            (seg.labels == LABEL_BACKGROUND).sum() / total,
        ],
        dtype=np.float64,
    )


@dataclass(frozen=True)
class ClusterModel:
    k: int
    centers: np.ndarray
    seed: int
    wcss: float


def _kmeans_pp_init(points: np.ndarray, k: int, rng: np.random.Generator):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]), dtype=np.float64)
    centers[0] = points[rng.integers(n)]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for c in range(1, k):
        total = d2.sum()
        if total <= 0:
            # all remaining points coincide with a chosen center
            centers[c] = points[rng.integers(n)]
            continue
        probs = d2 / total
        idx = rng.choice(n, p=probs)
        centers[c] = points[idx]
        d2 = np.minimum(d2, ((points - centers[c]) ** 2).sum(axis=1))
    return centers


def _lloyd(points: np.ndarray, centers: np.ndarray, max_iters: int):
    k = centers.shape[0]
    labels, wcss = kmeans_assign(points, centers)
    for _ in range(max_iters):
        new_centers = centers.copy()
        for c in range(k):
            member = labels == c
            if member.any():
                new_centers[c] = points[member].mean(axis=0)
            else:
                # re-seed an empty cluster from the farthest point
                d2 = ((points - centers[labels]) ** 2).sum(axis=1)
                new_centers[c] = points[int(np.argmax(d2))]
        new_labels, new_wcss = kmeans_assign(points, new_centers)
        if np.array_equal(new_labels, labels) and np.array_equal(
            new_centers, centers
        ):
            break
        centers, labels, wcss = new_centers, new_labels, new_wcss
    return centers, labels, wcss


def kmeans_pp(
    vectors: Sequence[np.ndarray], k: int, seed: int, max_iters: int = 100
) -> ClusterModel:
    """Seeded k-means++ init followed by Lloyd iterations to a fixpoint."""
    points = np.asarray(vectors, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("vectors must form an (n, d) array")
    n = points.shape[0]
    if not 1 <= k <= n:
        raise ValueError(f"k={k} must be in [1, {n}]")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp_init(points, k, rng)
    centers, _, wcss = _lloyd(points, centers, max_iters)
    return ClusterModel(k=k, centers=centers, seed=seed, wcss=float(wcss))


def assign_cluster(v: np.ndarray, model: ClusterModel) -> int:
    """Nearest center by L2; ties break to the lowest cluster id."""
    d2 = ((model.centers - np.asarray(v, dtype=np.float64)) ** 2).sum(axis=1)
    return int(np.argmin(d2))


def elbow_curve(
    vectors: Sequence[np.ndarray],
    k_range: Sequence[int],
    seed: int,
    restarts: int = 5,
    max_iters: int = 100,
) -> List[Tuple[int, float]]:
    """Best-of-restarts wcss per k, warm-started so the curve is monotone.

    For each k the candidates are ``restarts`` fresh k-means++ fits plus a
    warm start that extends the previous best centers with the farthest
    point; that extension can only lower wcss, so wcss(k+1) <= wcss(k).
    """
    ks = sorted(set(int(k) for k in k_range))
    if not ks:
        raise ValueError("empty k range")
    points = np.asarray(vectors, dtype=np.float64)
    out: List[Tuple[int, float]] = []
    prev_best: Optional[ClusterModel] = None
    for k in ks:
        best = None
        for r in range(restarts):
            model = kmeans_pp(points, k, seed + r, max_iters=max_iters)
            if best is None or model.wcss < best.wcss:
                best = model
        if prev_best is not None and prev_best.k < k:
            centers = prev_best.centers
            for _ in range(k - prev_best.k):
                labels, _ = kmeans_assign(points, centers)
                d2 = ((points - centers[labels]) ** 2).sum(axis=1)
                centers = np.vstack([centers, points[int(np.argmax(d2))]])
            centers, _, wcss = _lloyd(points, centers, max_iters)
            if wcss < best.wcss:
                best = ClusterModel(k=k, centers=centers, seed=seed,
                                    wcss=float(wcss))
        out.append((k, best.wcss))
        prev_best = best
    return out


def nnls_pg(
    A: np.ndarray,
    b: np.ndarray,
    tol: float = 1e-8,
    max_iters: int = 20000,
) -> np.ndarray:
    """Non-negative least squares min ||Ax - b|| s.t. x >= 0 by projected
    gradient with a fixed 1/L step."""
    A = np.asarray(A, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    AtA = A.T @ A
    Atb = A.T @ b
    lam = np.linalg.eigvalsh(AtA)[-1]
    if lam <= 0:
        return np.zeros(A.shape[1])
    step = 1.0 / lam
    x = np.zeros(A.shape[1])
    for _ in range(max_iters):
        grad = AtA @ x - Atb
        x_new = np.maximum(0.0, x - step * grad)
        if np.abs(x_new - x).max() < tol:
            x = x_new
            break
        x = x_new
    return x


@dataclass(frozen=True)
class ComponentPriors:
    size: Tuple[int, int]
    priors: Dict[int, Dict[str, np.ndarray]]
    weights: Dict[int, np.ndarray]


@dataclass(frozen=True)
class TrainingItem:
    seg: SegmentationMap
    component_fdms: Dict[str, DensityMap]
    gt_fdm: DensityMap
    cluster_id: int


def _to_canonical(m, size) -> np.ndarray:
    v = resize_bilinear(as_values(m), size[0], size[1])
    np.maximum(v, 0.0, out=v)
    total = v.sum()
    return v / total if total > 0 else v


def _masked_priors(item: TrainingItem, priors, size) -> np.ndarray:
    """Stack of the cluster's priors restricted to the item's masks,
    renormalized per component; shape (5, rows*cols)."""
    cols = []
    for comp in COMPONENTS:
        prior = priors[item.cluster_id][comp]
        mask = resize_bilinear(
            item.seg.component_mask(comp).astype(np.float64), size[0], size[1]
        ) > 0.5
        v = prior * mask
        total = v.sum()
        cols.append((v / total if total > 0 else v).ravel())
    return np.stack(cols)


def fit_component_priors(
    training: Sequence[TrainingItem],
    canonical_size: Tuple[int, int] = CANONICAL_PRIOR_SIZE,
    clusters: Optional[Sequence[int]] = None,
) -> ComponentPriors:
    """Per-cluster mean component maps plus NNLS combination weights.

    ``clusters`` lists the ids that must be covered (e.g. range(model.k));
    by default only the ids present in the training data are fitted.
    """
    if not training:
        raise ValueError("no training data")
    if clusters is None:
        clusters = sorted({item.cluster_id for item in training})
    by_cluster = {c: [t for t in training if t.cluster_id == c]
                  for c in clusters}
    empty = [c for c, items in by_cluster.items() if not items]
    if empty:
        raise ValueError(f"clusters without training data: {empty}")

    priors: Dict[int, Dict[str, np.ndarray]] = {}
    for c, items in by_cluster.items():
        priors[c] = {}
        for comp in COMPONENTS:
            stack = [
                _to_canonical(t.component_fdms[comp], canonical_size)
                for t in items
                if comp in t.component_fdms
            ]
            mean = (
                np.mean(stack, axis=0)
                if stack
                else np.zeros(canonical_size, dtype=np.float64)
            )
            total = mean.sum()
            priors[c][comp] = mean / total if total > 0 else mean

    weights: Dict[int, np.ndarray] = {}
    for c, items in by_cluster.items():
        rows = []
        targets = []
        for t in items:
            rows.append(_masked_priors(t, priors, canonical_size))
            targets.append(_to_canonical(t.gt_fdm, canonical_size).ravel())
        A = np.concatenate([r.T for r in rows], axis=0)
        b = np.concatenate(targets)
        weights[c] = nnls_pg(A, b)
    return ComponentPriors(size=canonical_size, priors=priors, weights=weights)


def predict_saliency(
    seg: SegmentationMap, model: ClusterModel, priors: ComponentPriors
) -> Tuple[DensityMap, Dict[str, DensityMap]]:
    """Cluster-conditioned saliency at the segmentation's resolution.

    Each component map is the cluster prior restricted to the component's
    mask (zero when absent); the final map is the weighted non-negative
    combination, normalized.
    """
    cluster = assign_cluster(seg_stats(seg), model)
    h, w = seg.height, seg.width
    comp_maps: Dict[str, DensityMap] = {}
    final = np.zeros((h, w), dtype=np.float64)
    wvec = priors.weights[cluster]
    for i, comp in enumerate(COMPONENTS):
        prior = resize_bilinear(priors.priors[cluster][comp], h, w)
        np.maximum(prior, 0.0, out=prior)
        v = prior * seg.component_mask(comp)
        total = v.sum()
        if total > 0:
            v = v / total
            comp_maps[comp] = DensityMap(v, normalized=True)
        else:
            comp_maps[comp] = DensityMap(np.zeros((h, w)))
        final += wvec[i] * v
    total = final.sum()
    if total > 0:
        final_map = DensityMap(final / total, normalized=True)
    else:
        warnings.warn("all components absent or zero-weighted; uniform fallback")
        final_map = DensityMap(np.full((h, w), 1.0 / (h * w))).normalize()
    return final_map, comp_maps
