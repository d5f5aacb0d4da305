"""Command-line pipeline: FDM construction, clustering, saliency
prediction, scanpath simulation, imitation training, and evaluation.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error.
"""

import csv
import json
import sys
from pathlib import Path

import click

from . import density, imitate, layout, metrics, pipeline, simulate
from .io import (
    AtomicFile,
    load_checkpoint,
    load_cluster_artifacts,
    load_density_map,
    load_fixations,
    load_manifest,
    save_checkpoint,
    save_cluster_artifacts,
    save_density_map,
    save_fixations,
    save_metric_report,
    save_training_log,
)
from .render import RenderSpec, render_heatmap, render_scanpath


@click.group()
def root():
    """Attention modeling toolkit for graphic-design documents."""


def _parallel(fn, items, jobs):
    """Order-preserving per-item map, threaded when --jobs > 1."""
    if jobs <= 1:
        return [fn(item) for item in items]
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _entries(manifest_path, split):
    manifest = load_manifest(manifest_path)
    if split == "all":
        return manifest.entries
    entries = manifest.split(split)
    if not entries:
        raise ValueError(f"no entries in split {split!r}")
    return entries


manifest_opt = click.option("--manifest", required=True,
                            type=click.Path(exists=True))
out_dir_opt = click.option("--out-dir", required=True, type=click.Path())
split_opt = click.option("--split", default="all", show_default=True)
sigma_opt = click.option("--sigma", default=density.DEFAULT_SIGMA,
                         show_default=True)
jobs_opt = click.option("--jobs", default=1, show_default=True,
                        help="parallel per-image workers")


@root.command("build-fdm")
@manifest_opt
@out_dir_opt
@split_opt
@sigma_opt
@jobs_opt
def build_fdm_cmd(manifest, out_dir, split, sigma, jobs):
    """Write a ground-truth FDM per image, plus an entropy table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(entry):
        seg = pipeline.entry_segmentation(entry)
        fdm = pipeline.gt_fdm(entry, seg, sigma).normalize()
        save_density_map(fdm, out_dir / f"{entry.image_id}_fdm.png")
        return entry.image_id, density.fdm_entropy(fdm)

    rows = _parallel(one, _entries(manifest, split), jobs)
    with AtomicFile(out_dir / "fdm_stats.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "entropy_bits"])
        writer.writerows([(i, f"{e:.6g}") for i, e in rows])
    click.echo(f"wrote {len(rows)} FDMs to {out_dir}")


@root.command("dwell-map")
@manifest_opt
@out_dir_opt
@split_opt
@sigma_opt
@jobs_opt
def dwell_map_cmd(manifest, out_dir, split, sigma, jobs):
    """Write a duration-weighted dwell map per image."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(entry):
        seg = pipeline.entry_segmentation(entry)
        fixations = [f for sp in pipeline.entry_scanpaths(entry)
                     for f in sp.fixations]
        dm = density.dwell_map(fixations, seg.width, seg.height, sigma)
        save_density_map(dm, out_dir / f"{entry.image_id}_dwell.png")

    done = _parallel(one, _entries(manifest, split), jobs)
    click.echo(f"wrote {len(done)} dwell maps to {out_dir}")


@root.command("seg-stats")
@manifest_opt
@out_dir_opt
@split_opt
def seg_stats_cmd(manifest, out_dir, split):
    """Write the component area-ratio table."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with AtomicFile(out_dir / "seg_stats.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id", "r_img", "r_text", "r_banner", "r_bg"])
        for entry in _entries(manifest, split):
            stats = layout.seg_stats(pipeline.entry_segmentation(entry))
            writer.writerow([entry.image_id] + [f"{v:.6g}" for v in stats])
    click.echo(f"wrote {out_dir / 'seg_stats.csv'}")


@root.command("cluster")
@manifest_opt
@out_dir_opt
@split_opt
@click.option("--k", default=6, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--elbow-max", default=0,
              help="also write elbow.csv for k=1..N")
def cluster_cmd(manifest, out_dir, split, k, seed, elbow_max):
    """Cluster layouts by their area-ratio vectors with k-means++."""
    out_dir = Path(out_dir)
    entries = _entries(manifest, split)
    vectors = [layout.seg_stats(pipeline.entry_segmentation(e))
               for e in entries]
    model = layout.kmeans_pp(vectors, k, seed)
    save_cluster_artifacts(out_dir, model)
    if elbow_max:
        curve = layout.elbow_curve(vectors, range(1, elbow_max + 1), seed)
        with AtomicFile(out_dir / "elbow.csv") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "wcss"])
            writer.writerows([(kk, f"{w:.6g}") for kk, w in curve])
    click.echo(f"k={k} wcss={model.wcss:.6g}; model in {out_dir}")


@root.command("fit-priors")
@manifest_opt
@out_dir_opt
@split_opt
@sigma_opt
@click.option("--model-dir", required=True, type=click.Path(exists=True))
def fit_priors_cmd(manifest, out_dir, split, sigma, model_dir):
    """Fit per-cluster component priors and combination weights."""
    model, _ = load_cluster_artifacts(model_dir)
    items = pipeline.training_items(_entries(manifest, split), model, sigma)
    priors = layout.fit_component_priors(items)
    save_cluster_artifacts(out_dir, model, priors)
    click.echo(f"priors for {len(priors.priors)} clusters in {out_dir}")


@root.command("predict")
@manifest_opt
@out_dir_opt
@split_opt
@click.option("--model-dir", required=True, type=click.Path(exists=True))
@jobs_opt
def predict_cmd(manifest, out_dir, split, model_dir, jobs):
    """Predict per-image saliency from the fitted cluster priors."""
    model, priors = load_cluster_artifacts(model_dir)
    if priors is None:
        raise ValueError(f"{model_dir} has no fitted priors; run fit-priors")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    def one(entry):
        seg = pipeline.entry_segmentation(entry)
        final, comps = layout.predict_saliency(seg, model, priors)
        save_density_map(final, out_dir / f"{entry.image_id}_pred.png")
        for comp, m in comps.items():
            save_density_map(m, out_dir / f"{entry.image_id}_{comp}.png")

    done = _parallel(one, _entries(manifest, split), jobs)
    click.echo(f"predicted {len(done)} images into {out_dir}")


@root.command("simulate")
@manifest_opt
@out_dir_opt
@split_opt
@click.option("--model-dir", required=True, type=click.Path(exists=True))
@click.option("--policy", type=click.Choice(["wta", "learned"]),
              default="wta", show_default=True)
@click.option("--checkpoint", type=click.Path(exists=True),
              help="imitation checkpoint (required for --policy learned)")
@click.option("--T", "horizon", default=7, show_default=True)
@click.option("--seed", required=True, type=int)
@click.option("--radius", default=simulate.DEFAULT_FOVEA_RADIUS,
              show_default=True)
def simulate_cmd(manifest, out_dir, split, model_dir, policy, checkpoint,
                 horizon, seed, radius):
    """Roll out scanpaths under the WTA or the learned policy."""
    model, priors = load_cluster_artifacts(model_dir)
    if priors is None:
        raise ValueError(f"{model_dir} has no fitted priors; run fit-priors")
    learned = None
    if policy == "learned":
        if checkpoint is None:
            raise ValueError("--policy learned requires --checkpoint")
        learned, _ = load_checkpoint(checkpoint)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scanpaths = []
    for i, entry in enumerate(_entries(manifest, split)):
        seg = pipeline.entry_segmentation(entry)
        final, comps = layout.predict_saliency(seg, model, priors)
        b0, high = pipeline.beliefs_from_components(seg, comps)
        pol = (imitate.LinearPolicy(learned) if learned is not None
               else simulate.wta_policy(final))
        _, sp = simulate.rollout(
            pol, b0, high, horizon, radius=radius, rng_seed=seed + i,
            image_size=(seg.width, seg.height), image_id=entry.image_id,
            subject_id=policy,
        )
        scanpaths.append(sp)
    save_fixations(out_dir / "scanpaths.csv", scanpaths)
    click.echo(f"wrote {len(scanpaths)} scanpaths to {out_dir}")


@root.command("train-irl")
@manifest_opt
@out_dir_opt
@split_opt
@click.option("--model-dir", required=True, type=click.Path(exists=True))
@click.option("--seed", required=True, type=int)
@click.option("--config", "config_path", type=click.Path(exists=True),
              help="JSON overriding ImitationConfig fields")
def train_irl_cmd(manifest, out_dir, split, model_dir, seed, config_path):
    """Train the imitation policy on the manifest's human scanpaths."""
    model, priors = load_cluster_artifacts(model_dir)
    if priors is None:
        raise ValueError(f"{model_dir} has no fitted priors; run fit-priors")
    overrides = {}
    if config_path:
        overrides = json.loads(Path(config_path).read_text())
    config = imitate.ImitationConfig(**{**overrides, "seed": seed})
    examples = pipeline.imitation_examples(_entries(manifest, split), model,
                                           priors)
    trained, history = imitate.train(examples, config)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out_dir / "checkpoint.json", trained, config)
    save_training_log(out_dir / "training_log.csv", history)
    click.echo(f"trained {config.epochs} epochs; checkpoint in {out_dir}")


@root.command("evaluate")
@manifest_opt
@out_dir_opt
@split_opt
@sigma_opt
@click.option("--pred-dir", required=True, type=click.Path(exists=True))
@click.option("--pred-scanpaths", type=click.Path(exists=True),
              help="scanpaths.csv from the simulate command")
@click.option("--seed", default=0, show_default=True)
def evaluate_cmd(manifest, out_dir, split, sigma, pred_dir, pred_scanpaths,
                 seed):
    """Score predicted maps (and optionally scanpaths) against the data."""
    entries = _entries(manifest, split)
    pred_dir = Path(pred_dir)
    preds = {}
    for entry in entries:
        path = pred_dir / f"{entry.image_id}_pred.png"
        if not path.exists():
            raise ValueError(f"missing prediction {path}")
        preds[entry.image_id] = load_density_map(path)
    report = pipeline.evaluate_saliency(entries, preds, sigma, seed)
    if pred_scanpaths:
        predicted = {sp.image_id: sp
                     for sp in load_fixations(pred_scanpaths).values()}
        seg = pipeline.entry_segmentation(entries[0])
        sp_report = pipeline.evaluate_scanpaths(
            entries, predicted, (seg.width, seg.height)
        )
        for image_id, row in sp_report.per_image.items():
            report.per_image.setdefault(image_id, {}).update(row)
        report.finalize()
    save_metric_report(out_dir, report)
    click.echo(json.dumps(report.aggregate, indent=2, sort_keys=True))


@root.command("io-score")
@manifest_opt
@out_dir_opt
@split_opt
def io_score_cmd(manifest, out_dir, split):
    """Inter-observer agreement: each viewer predicting the others."""
    entries = _entries(manifest, split)
    by_image = {e.image_id: pipeline.entry_scanpaths(e) for e in entries}
    seg = pipeline.entry_segmentation(entries[0])
    scores = metrics.inter_observer(by_image, (seg.width, seg.height))
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with AtomicFile(out_dir / "io_scores.json") as fh:
        json.dump({"version": 1, **scores}, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(json.dumps(scores, indent=2, sort_keys=True))


@root.command("render")
@click.option("--image", required=True, type=click.Path(exists=True))
@click.option("--map", "map_path", type=click.Path(exists=True))
@click.option("--scanpaths", type=click.Path(exists=True))
@click.option("--image-id", help="select one image from a scanpath CSV")
@click.option("--subject", help="select one subject from a scanpath CSV")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--alpha", default=0.5, show_default=True)
@click.option("--colormap", default="jet", show_default=True)
def render_cmd(image, map_path, scanpaths, image_id, subject, out_path,
               alpha, colormap):
    """Render a heatmap overlay or a numbered scanpath."""
    if (map_path is None) == (scanpaths is None):
        raise ValueError("provide exactly one of --map or --scanpaths")
    spec = RenderSpec(colormap=colormap, overlay_alpha=alpha)
    if map_path:
        render_heatmap(image, load_density_map(map_path), spec, out_path)
    else:
        groups = load_fixations(scanpaths)
        matches = [
            sp for (img, subj), sp in sorted(groups.items())
            if (image_id is None or img == image_id)
            and (subject is None or subj == subject)
        ]
        if not matches:
            raise ValueError("no scanpath matches the given filters")
        render_scanpath(image, matches[0], spec, out_path)
    click.echo(f"wrote {out_path}")


def main(argv=None) -> int:
    try:
        root.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        click.echo(exc.format_message(), err=True)
        if exc.ctx is not None:
            click.echo(exc.ctx.get_usage(), err=True)
        return 1
    except click.Abort:
        return 1
    except (ValueError, KeyError) as exc:
        click.echo(f"error: {exc}", err=True)
        return 1
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
