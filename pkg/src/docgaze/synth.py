"""Seeded synthetic mini-corpus for tests and end-to-end runs.

Real gaze datasets cannot be redistributed, so the repo ships a small
generated stand-in: a handful of layout templates rendered as colored
rectangle "screenshots" with label maps, and fixations sampled from a
planted component-weighted attention distribution. Everything is
deterministic in the seed.
"""

from pathlib import Path
from typing import Dict, List, Tuple

import numpy as np
from PIL import Image

from .density import DensityMap, Fixation, Scanpath
from .imitate import ImitationExample, ImitationModel, LinearPolicy
from .io import (
    AtomicFile,
    DatasetManifest,
    ManifestEntry,
    save_fixations,
    save_manifest,
    save_segmentation,
)
from .kernels import gaussian_blur
from .layout import (
    LABEL_BACKGROUND,
    LABEL_BANNER,
    LABEL_IMAGE,
    LABEL_LOGO,
    LABEL_TEXT,
    SegmentationMap,
)
from .simulate import (
    GRID_COLS,
    GRID_ROWS,
    init_belief,
    rollout,
)

WIDTH = 480
HEIGHT = 320

LABEL_COLORS = {
    LABEL_BACKGROUND: (245, 245, 245),
    LABEL_IMAGE: (120, 180, 120),
    LABEL_TEXT: (90, 110, 200),
    LABEL_BANNER: (220, 120, 100),
    LABEL_LOGO: (240, 200, 60),
}

# fixation attractiveness per component, per layout template; logos and
# faces dominate, banners are near-ignored
ATTENTION_WEIGHTS = [
    {"logo": 8.0, "face": 5.0, "text": 3.0, "image": 1.5, "banner": 0.2},
    {"logo": 7.0, "face": 4.0, "text": 4.5, "image": 1.0, "banner": 0.3},
    {"logo": 9.0, "face": 6.0, "text": 2.0, "image": 2.0, "banner": 0.2},
]


def _rect(labels, label, x0, y0, w, h):
    labels[y0 : y0 + h, x0 : x0 + w] = label


def _make_layout(template: int, rng: np.random.Generator) -> SegmentationMap:
    labels = np.full((HEIGHT, WIDTH), LABEL_BACKGROUND, dtype=np.uint8)
    jx = int(rng.integers(-8, 9))
    jy = int(rng.integers(-6, 7))
    if template == 0:
        # news-like: banner, left text column, right image
        _rect(labels, LABEL_BANNER, 0, 0, WIDTH, 36)
        _rect(labels, LABEL_TEXT, 24 + jx, 60 + jy, 200, 200)
        _rect(labels, LABEL_IMAGE, 260 + jx, 70 + jy, 180, 160)
        _rect(labels, LABEL_LOGO, 16, 4, 64, 28)
    elif template == 1:
        # text-heavy: two text blocks, small image strip
        _rect(labels, LABEL_TEXT, 30 + jx, 40 + jy, 420, 90)
        _rect(labels, LABEL_TEXT, 30 + jx, 160 + jy, 300, 120)
        _rect(labels, LABEL_IMAGE, 350 + jx, 170 + jy, 100, 90)
        _rect(labels, LABEL_BANNER, 0, HEIGHT - 30, WIDTH, 30)
        _rect(labels, LABEL_LOGO, WIDTH - 90, 8, 70, 26)
    else:
        # image-led: hero image, caption text, corner logo
        _rect(labels, LABEL_IMAGE, 40 + jx, 40 + jy, 400, 180)
        _rect(labels, LABEL_TEXT, 60 + jx, 240 + jy, 320, 56)
        _rect(labels, LABEL_BANNER, WIDTH - 70, 50, 60, 200)
        _rect(labels, LABEL_LOGO, 12, 10, 56, 30)
    face = np.zeros((HEIGHT, WIDTH), dtype=bool)
    # one face inside the (first) image region
    ys, xs = np.nonzero(labels == LABEL_IMAGE)
    cy, cx = int(ys.mean()), int(xs.mean())
    face[max(cy - 18, 0) : cy + 18, max(cx - 14, 0) : cx + 14] = True
    return SegmentationMap(labels=labels, face_mask=face)


def _render_screenshot(seg: SegmentationMap, rng: np.random.Generator):
    img = np.zeros((HEIGHT, WIDTH, 3), dtype=np.uint8)
    for label, color in LABEL_COLORS.items():
        img[seg.labels == label] = color
    img[seg.face_mask] = (230, 180, 150)
    noise = rng.integers(-8, 9, size=img.shape)
    return np.clip(img.astype(int) + noise, 0, 255).astype(np.uint8)


def planted_attention_map(seg: SegmentationMap, template: int) -> DensityMap:
    """The ground-truth viewing distribution fixations are drawn from."""
    weights = ATTENTION_WEIGHTS[template % len(ATTENTION_WEIGHTS)]
    field = np.full((HEIGHT, WIDTH), 0.05)
    for comp, w in weights.items():
        field += w * seg.component_mask(comp)
    return DensityMap(gaussian_blur(field, 12.0)).normalize()


def _sample_scanpath(
    attention: DensityMap,
    image_id: str,
    subject_id: str,
    n_fix: int,
    rng: np.random.Generator,
) -> Scanpath:
    p = attention.values.ravel()
    p = p / p.sum()
    fixes = []
    for i in range(n_fix):
        flat = int(rng.choice(p.size, p=p))
        y, x = divmod(flat, WIDTH)
        fixes.append(
            Fixation(
                x=min(x + rng.uniform(0, 1), WIDTH - 1e-6),
                y=min(y + rng.uniform(0, 1), HEIGHT - 1e-6),
                duration_ms=float(rng.uniform(120, 420)),
                index=i,
            )
        )
    return Scanpath(image_id=image_id, subject_id=subject_id,
                    fixations=tuple(fixes))


def generate_corpus(
    out_dir,
    n_images: int = 12,
    n_subjects: int = 4,
    fixations_per_subject: int = 10,
    seed: int = 7,
) -> Path:
    """Write the corpus and return the manifest path."""
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    (out_dir / "fixations").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_images):
        template = i % len(ATTENTION_WEIGHTS)
        image_id = f"doc{i:03d}"
        seg = _make_layout(template, rng)
        screenshot = _render_screenshot(seg, rng)
        attention = planted_attention_map(seg, template)

        img_path = out_dir / "images" / f"{image_id}.png"
        with AtomicFile(img_path, "wb") as fh:
            Image.fromarray(screenshot, mode="RGB").save(fh, format="PNG")
        seg_path = out_dir / "images" / f"{image_id}_seg.png"
        face_path = out_dir / "images" / f"{image_id}_face.png"
        save_segmentation(seg_path, seg, face_mask_path=face_path)

        scanpaths = [
            _sample_scanpath(attention, image_id, f"s{s:02d}",
                             fixations_per_subject, rng)
            for s in range(n_subjects)
        ]
        fix_path = out_dir / "fixations" / f"{image_id}.csv"
        save_fixations(fix_path, scanpaths)

        split = "test" if i >= n_images - 3 else "train"
        entries.append(
            ManifestEntry(
                image_id=image_id,
                screenshot=img_path,
                segmentation=seg_path,
                fixations=fix_path,
                face_mask=face_path,
                split=split,
            )
        )
    manifest_path = out_dir / "manifest.json"
    save_manifest(manifest_path, DatasetManifest(entries=entries))
    return manifest_path


# --- planted-policy corpus for the imitation experiment --------------------

def planted_policy_model(seed: int = 0) -> ImitationModel:
    """A fixed linear policy with strong text/logo preference."""
    model = ImitationModel()
    theta = np.zeros_like(model.theta)
    theta[1] = 18.0   # text belief at the cell
    theta[2] = 12.0   # logo belief at the cell
    theta[7] = 6.0    # local text context
    theta[12] = -4.5  # top-of-page preference
    model.theta = theta
    return model


def _random_channels(rng: np.random.Generator) -> np.ndarray:
    """Smooth random component fields on the grid, max-normalized."""
    channels = np.zeros((5, GRID_ROWS, GRID_COLS))
    for c in range(5):
        field = rng.random((GRID_ROWS, GRID_COLS))
        field = gaussian_blur(field, 1.5)
        channels[c] = field / field.max()
    return channels


def make_imitation_dataset(
    n_images: int = 20,
    paths_per_image: int = 10,
    horizon: int = 7,
    seed: int = 11,
    heldout_per_image: int = 4,
) -> Tuple[List[ImitationExample], Dict[str, List[Scanpath]]]:
    """Documents with expert scanpaths rolled out from the planted policy.

    Returns training examples and a held-out scanpath set per image for
    scoring models that never saw them.
    """
    rng = np.random.default_rng(seed)
    expert = LinearPolicy(planted_policy_model())
    examples = []
    heldout: Dict[str, List[Scanpath]] = {}
    for i in range(n_images):
        image_id = f"synth{i:03d}"
        high = _random_channels(rng)
        low = np.stack([gaussian_blur(ch, 3.0) for ch in high])
        low = np.stack([ch / ch.max() if ch.max() > 0 else ch for ch in low])
        layout = gaussian_blur(rng.random((GRID_ROWS, GRID_COLS)), 2.0)
        b0 = init_belief(low, layout)

        def roll(subject):
            _, sp = rollout(
                expert, b0, high, horizon,
                rng_seed=int(rng.integers(2**63 - 1)),
                image_size=(WIDTH, HEIGHT), image_id=image_id,
                subject_id=subject,
            )
            return sp

        train_paths = tuple(roll(f"train{j}") for j in range(paths_per_image))
        heldout[image_id] = [roll(f"held{j}") for j in range(heldout_per_image)]
        examples.append(
            ImitationExample(
                image_id=image_id,
                b0=b0,
                high_res=high,
                scanpaths=train_paths,
                image_size=(WIDTH, HEIGHT),
            )
        )
    return examples, heldout
