"""Per-image glue shared by the CLI and the end-to-end tests."""

from typing import Dict, List, Sequence, Tuple

import numpy as np

from . import density, imitate, layout, metrics, simulate
from .density import DensityMap, Scanpath
from .io import ManifestEntry, load_fixations, load_segmentation


def entry_scanpaths(entry: ManifestEntry) -> List[Scanpath]:
    groups = load_fixations(entry.fixations)
    return [sp for (img, _), sp in sorted(groups.items()) if img == entry.image_id]


def entry_segmentation(entry: ManifestEntry):
    return load_segmentation(entry.segmentation, face_mask_path=entry.face_mask)


def gt_fdm(entry: ManifestEntry, seg, sigma: float = density.DEFAULT_SIGMA):
    """Whole-page ground-truth FDM (raw mass) from all subjects."""
    fixations = [f for sp in entry_scanpaths(entry) for f in sp.fixations]
    return density.build_fdm(fixations, seg.width, seg.height, sigma,
                             normalize=False)


def component_fdms(
    seg, whole: DensityMap, sigma: float = density.DEFAULT_SIGMA
) -> Dict[str, DensityMap]:
    """Ground-truth component FDMs; the image channel is the residual map."""
    out: Dict[str, DensityMap] = {}
    masks = []
    for comp in layout.COMPONENTS:
        if comp == "image":
            continue
        mask = seg.component_mask(comp)
        out[comp] = density.component_fdm(whole, mask, sigma)
        masks.append(mask)
    out["image"] = density.residual_image_fdm(whole, masks, sigma)
    return out


def training_items(
    entries: Sequence[ManifestEntry],
    model: layout.ClusterModel,
    sigma: float = density.DEFAULT_SIGMA,
) -> List[layout.TrainingItem]:
    items = []
    for entry in entries:
        seg = entry_segmentation(entry)
        whole = gt_fdm(entry, seg, sigma)
        items.append(
            layout.TrainingItem(
                seg=seg,
                component_fdms=component_fdms(seg, whole, sigma),
                gt_fdm=whole.normalize(),
                cluster_id=layout.assign_cluster(layout.seg_stats(seg), model),
            )
        )
    return items


def beliefs_from_components(
    seg, comp_maps: Dict[str, DensityMap],
    lowres_sigma: float = simulate.DEFAULT_LOWRES_SIGMA,
) -> Tuple[simulate.BeliefState, np.ndarray]:
    """(initial belief state, high-res channels) for one document."""
    high = simulate.belief_channels(comp_maps)
    low = simulate.lowres_channels(comp_maps, lowres_sigma)
    b0 = simulate.init_belief(low, simulate.layout_channel(seg))
    return b0, high


def imitation_examples(
    entries: Sequence[ManifestEntry],
    model: layout.ClusterModel,
    priors: layout.ComponentPriors,
) -> List[imitate.ImitationExample]:
    examples = []
    for entry in entries:
        seg = entry_segmentation(entry)
        _, comp_maps = layout.predict_saliency(seg, model, priors)
        b0, high = beliefs_from_components(seg, comp_maps)
        examples.append(
            imitate.ImitationExample(
                image_id=entry.image_id,
                b0=b0,
                high_res=high,
                scanpaths=tuple(entry_scanpaths(entry)),
                image_size=(seg.width, seg.height),
            )
        )
    return examples


def shuffle_fixations_for(
    entries: Sequence[ManifestEntry],
    exclude_image: str,
    n_positives: int,
    seed: int,
    cap_factor: int = 10,
):
    """sAUC negative set: other images' fixations, capped at 10x positives."""
    pool = []
    for entry in entries:
        if entry.image_id == exclude_image:
            continue
        for sp in entry_scanpaths(entry):
            pool.extend(sp.fixations)
    cap = cap_factor * n_positives
    if len(pool) > cap:
        rng = np.random.default_rng(seed)
        idx = rng.choice(len(pool), size=cap, replace=False)
        pool = [pool[i] for i in sorted(idx)]
    return pool


def evaluate_saliency(
    entries: Sequence[ManifestEntry],
    pred_maps: Dict[str, DensityMap],
    sigma: float = density.DEFAULT_SIGMA,
    seed: int = 0,
) -> metrics.MetricReport:
    report = metrics.MetricReport()
    for entry in entries:
        seg = entry_segmentation(entry)
        pred = pred_maps[entry.image_id]
        fixations = [f for sp in entry_scanpaths(entry) for f in sp.fixations]
        gt = density.build_fdm(fixations, seg.width, seg.height, sigma)
        shuffle = shuffle_fixations_for(entries, entry.image_id,
                                        len(fixations), seed)
        row = {
            "nss": metrics.nss(pred, fixations),
            "cc": metrics.cc(pred, gt),
            "kl": metrics.kl(gt, pred.normalize() if not pred.normalized else pred),
            "auc_judd": metrics.auc_judd(pred, fixations),
        }
        if shuffle:
            row["sauc"] = metrics.sauc(pred, fixations, shuffle)
        report.per_image[entry.image_id] = row
    return report.finalize()


def evaluate_scanpaths(
    entries: Sequence[ManifestEntry],
    predicted: Dict[str, Scanpath],
    screen_size: Tuple[float, float],
    bandwidth: float = metrics.CLUSTER_BANDWIDTH_PX,
) -> metrics.MetricReport:
    report = metrics.MetricReport()
    for entry in entries:
        if entry.image_id not in predicted:
            continue
        human = entry_scanpaths(entry)
        clusterer = metrics.fit_fixation_clusterer(human, bandwidth)
        pred = predicted[entry.image_id]
        ss = [metrics.sequence_score(pred, h, clusterer) for h in human]
        mm = [metrics.multimatch(pred, h, screen_size) for h in human]
        row = {"sequence_score": float(np.mean(ss))}
        for dim in ("shape", "direction", "length", "position"):
            vals = [m[dim] for m in mm if m[dim] is not None]
            if vals:
                row[f"multimatch_{dim}"] = float(np.mean(vals))
        report.per_image[entry.image_id] = row
    return report.finalize()
