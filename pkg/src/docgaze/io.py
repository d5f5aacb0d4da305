"""File formats and persistence.

CSV for fixation logs and tabular reports, JSON for manifests, configs,
and model checkpoints, PNG for raster data (8-bit label maps, 16-bit
density maps with a JSON sidecar recording the scale). All writes go
through a temp-file + atomic rename so failures never leave partial
outputs.
"""

import csv
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from PIL import Image

from .density import DensityMap, Fixation, Scanpath
from .imitate import ImitationConfig, ImitationModel, N_WEIGHTS
from .layout import (
    ClusterModel,
    ComponentPriors,
    LABEL_NAMES,
    SegmentationMap,
)

FORMAT_VERSION = 1

FIXATION_COLUMNS = ["image_id", "subject_id", "fix_index", "x_px", "y_px",
                    "duration_ms"]


class AtomicFile:
    """Write to a sibling temp file, atomically rename on success."""

    def __init__(self, path, mode: str = "w"):
        self.path = Path(path)
        self.mode = mode
        self._tmp = None
        self._fh = None

    def __enter__(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent,
                                   prefix=f".{self.path.name}.")
        self._tmp = tmp
        kwargs = {} if "b" in self.mode else {"encoding": "utf-8",
                                              "newline": ""}
        self._fh = os.fdopen(fd, self.mode, **kwargs)
        return self._fh

    def __exit__(self, exc_type, exc, tb):
        self._fh.close()
        if exc_type is None:
            os.replace(self._tmp, self.path)
        else:
            os.unlink(self._tmp)
        return False


def write_json(path, obj):
    with AtomicFile(path) as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


# --- fixation logs ---------------------------------------------------------

def load_fixations(path) -> Dict[Tuple[str, str], Scanpath]:
    """Parse a fixation CSV into scanpaths keyed by (image_id, subject_id)."""
    groups: Dict[Tuple[str, str], List[Fixation]] = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in FIXATION_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise ValueError(f"{path}: missing column(s) {missing}")
        for lineno, row in enumerate(reader, start=2):
            try:
                key = (row["image_id"], row["subject_id"])
                fix = Fixation(
                    x=float(row["x_px"]),
                    y=float(row["y_px"]),
                    duration_ms=float(row["duration_ms"]),
                    index=int(row["fix_index"]),
                )
            except (TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed row ({exc})")
            groups.setdefault(key, []).append(fix)
    out = {}
    for (image_id, subject_id), fixes in groups.items():
        fixes.sort(key=lambda f: f.index)
        out[(image_id, subject_id)] = Scanpath(
            image_id=image_id, subject_id=subject_id, fixations=tuple(fixes)
        )
    return out


def save_fixations(path, scanpaths: Sequence[Scanpath]):
    with AtomicFile(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(FIXATION_COLUMNS)
        for sp in scanpaths:
            for f in sp.fixations:
                writer.writerow(
                    [sp.image_id, sp.subject_id, f.index,
                     f"{f.x:.6g}", f"{f.y:.6g}", f"{f.duration_ms:.6g}"]
                )


# --- segmentation maps -----------------------------------------------------

def load_segmentation(path, face_mask_path=None) -> SegmentationMap:
    """Load an 8-bit single-channel label PNG (+ optional 0/255 face mask)."""
    img = Image.open(path)
    if img.mode != "L":
        raise ValueError(f"{path}: expected 8-bit single-channel PNG, "
                         f"got mode {img.mode!r}")
    labels = np.asarray(img)
    bad = sorted(set(np.unique(labels).tolist()) - set(LABEL_NAMES))
    if bad:
        raise ValueError(f"{path}: unknown label value(s) {bad}")
    face = None
    if face_mask_path is not None:
        fimg = Image.open(face_mask_path)
        if fimg.mode != "L":
            raise ValueError(f"{face_mask_path}: expected 8-bit PNG")
        face = np.asarray(fimg) > 127
    return SegmentationMap(labels=labels, face_mask=face)


def save_segmentation(path, seg: SegmentationMap, face_mask_path=None):
    with AtomicFile(path, "wb") as fh:
        Image.fromarray(seg.labels, mode="L").save(fh, format="PNG")
    if face_mask_path is not None and seg.face_mask is not None:
        with AtomicFile(face_mask_path, "wb") as fh:
            Image.fromarray(
                (seg.face_mask * 255).astype(np.uint8), mode="L"
            ).save(fh, format="PNG")


# --- density maps ----------------------------------------------------------

def save_density_map(m: DensityMap, path):
    """16-bit grayscale PNG scaled to [0, max]; max goes in a sidecar."""
    path = Path(path)
    peak = float(m.values.max())
    scale = 65535.0 / peak if peak > 0 else 0.0
    quant = np.round(m.values * scale).astype(np.uint16)
    with AtomicFile(path, "wb") as fh:
        Image.fromarray(quant).save(fh, format="PNG")
    write_json(path.with_suffix(".json"), {
        "version": FORMAT_VERSION,
        "max": peak,
        "normalized": bool(m.normalized),
        "width": m.width,
        "height": m.height,
    })


def load_density_map(path) -> DensityMap:
    path = Path(path)
    sidecar = path.with_suffix(".json")
    if not sidecar.exists():
        raise ValueError(f"missing sidecar {sidecar}")
    meta = read_json(sidecar)
    raw = np.asarray(Image.open(path), dtype=np.float64)
    peak = meta["max"]
    values = raw * (peak / 65535.0) if peak > 0 else np.zeros_like(raw)
    if meta.get("normalized"):
        total = values.sum()
        if total > 0:
            values = values / total
        return DensityMap(values, normalized=True)
    return DensityMap(values)


# --- dataset manifest ------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    image_id: str
    screenshot: Path
    segmentation: Path
    fixations: Path
    face_mask: Optional[Path] = None
    split: str = "train"


@dataclass
class DatasetManifest:
    entries: List[ManifestEntry] = field(default_factory=list)

    def split(self, name: str) -> List[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def __iter__(self):
        return iter(self.entries)

    def __len__(self):
        return len(self.entries)


def load_manifest(path) -> DatasetManifest:
    """Load and validate a dataset manifest; paths resolve relative to the
    manifest file. Adapting an external dataset means emitting this JSON."""
    path = Path(path)
    doc = read_json(path)
    base = path.parent
    entries = []
    seen = set()
    for raw in doc["entries"]:
        image_id = raw["image_id"]
        if image_id in seen:
            raise ValueError(f"duplicate image id {image_id!r}")
        seen.add(image_id)
        entry = ManifestEntry(
            image_id=image_id,
            screenshot=base / raw["screenshot"],
            segmentation=base / raw["segmentation"],
            fixations=base / raw["fixations"],
            face_mask=(base / raw["face_mask"]) if raw.get("face_mask") else None,
            split=raw.get("split", "train"),
        )
        for p in (entry.screenshot, entry.segmentation, entry.fixations):
            if not Path(p).exists():
                raise ValueError(f"{image_id}: missing file {p}")
        entries.append(entry)
    return DatasetManifest(entries=entries)


def save_manifest(path, manifest: DatasetManifest):
    base = Path(path).parent

    def rel(p):
        return os.path.relpath(p, base)

    write_json(path, {
        "version": FORMAT_VERSION,
        "entries": [
            {
                "image_id": e.image_id,
                "screenshot": rel(e.screenshot),
                "segmentation": rel(e.segmentation),
                "fixations": rel(e.fixations),
                **({"face_mask": rel(e.face_mask)} if e.face_mask else {}),
                "split": e.split,
            }
            for e in manifest.entries
        ],
    })


# --- cluster model + priors ------------------------------------------------

def save_cluster_artifacts(
    out_dir, model: ClusterModel, priors: Optional[ComponentPriors] = None
):
    """Versioned JSON document plus 16-bit PNG prior maps."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    doc = {
        "version": FORMAT_VERSION,
        "k": model.k,
        "seed": model.seed,
        "wcss": model.wcss,
        "centers": model.centers.tolist(),
    }
    if priors is not None:
        doc["prior_size"] = list(priors.size)
        doc["weights"] = {str(c): w.tolist() for c, w in priors.weights.items()}
        doc["priors"] = {}
        for c, comps in priors.priors.items():
            doc["priors"][str(c)] = {}
            for comp, values in comps.items():
                name = f"prior_c{c}_{comp}.png"
                save_density_map(DensityMap(values), out_dir / name)
                doc["priors"][str(c)][comp] = name
    write_json(out_dir / "cluster_model.json", doc)


def load_cluster_artifacts(out_dir):
    out_dir = Path(out_dir)
    doc = read_json(out_dir / "cluster_model.json")
    model = ClusterModel(
        k=doc["k"],
        centers=np.asarray(doc["centers"], dtype=np.float64),
        seed=doc["seed"],
        wcss=doc["wcss"],
    )
    priors = None
    if "priors" in doc:
        pr = {
            int(c): {
                comp: load_density_map(out_dir / name).values
                for comp, name in comps.items()
            }
            for c, comps in doc["priors"].items()
        }
        weights = {
            int(c): np.asarray(w, dtype=np.float64)
            for c, w in doc["weights"].items()
        }
        priors = ComponentPriors(size=tuple(doc["prior_size"]), priors=pr,
                                 weights=weights)
    return model, priors


# --- imitation checkpoints + logs ------------------------------------------

def save_checkpoint(path, model: ImitationModel, config: ImitationConfig):
    write_json(path, {
        "version": FORMAT_VERSION,
        "epoch": model.epoch,
        "policy": model.theta.tolist(),
        "critic": model.critic.tolist(),
        "discriminator": model.disc.tolist(),
        "config": vars(config),
    })


def load_checkpoint(path) -> Tuple[ImitationModel, ImitationConfig]:
    doc = read_json(path)
    model = ImitationModel(
        theta=np.asarray(doc["policy"], dtype=np.float64),
        critic=np.asarray(doc["critic"], dtype=np.float64),
        disc=np.asarray(doc["discriminator"], dtype=np.float64),
        epoch=doc["epoch"],
    )
    if model.theta.shape != (N_WEIGHTS,):
        raise ValueError(f"checkpoint has {model.theta.shape[0]} policy "
                         f"weights, expected {N_WEIGHTS}")
    return model, ImitationConfig(**doc["config"])


def save_training_log(path, history: Sequence[Dict[str, float]]):
    keys = list(history[0].keys()) if history else ["epoch"]
    with AtomicFile(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(keys)
        for row in history:
            writer.writerow([f"{row[k]:.6g}" for k in keys])


# --- metric reports --------------------------------------------------------

def save_metric_report(out_dir, report):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    write_json(out_dir / "metrics.json", {
        "version": FORMAT_VERSION,
        "per_image": report.per_image,
        "aggregate": report.aggregate,
    })
    keys = sorted({k for row in report.per_image.values() for k in row}
                  | set(report.aggregate))
    with AtomicFile(out_dir / "metrics.csv") as fh:
        writer = csv.writer(fh)
        writer.writerow(["image_id"] + keys)
        for image_id, row in sorted(report.per_image.items()):
            writer.writerow(
                [image_id] + [_fmt(row.get(k)) for k in keys]
            )
        writer.writerow(
            ["aggregate"] + [_fmt(report.aggregate.get(k)) for k in keys]
        )


def _fmt(v):
    return "" if v is None else f"{v:.6g}"
