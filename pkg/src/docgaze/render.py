"""Figure-style PNG outputs: heatmap overlays and numbered scanpaths."""

from dataclasses import dataclass

import matplotlib
import numpy as np
from PIL import Image, ImageDraw

from .density import Scanpath, as_values
from .io import AtomicFile
from .kernels import resize_bilinear


@dataclass(frozen=True)
class RenderSpec:
    colormap: str = "jet"
    overlay_alpha: float = 0.5
    marker_radius: float = 12.0
    numbering: bool = True

    def __post_init__(self):
        if not 0.0 <= self.overlay_alpha <= 1.0:
            raise ValueError("overlay alpha must be in [0, 1]")


def _load_image(image) -> Image.Image:
    if isinstance(image, Image.Image):
        return image.convert("RGB")
    return Image.open(image).convert("RGB")


def render_heatmap(image, density_map, spec: RenderSpec, out_path):
    """Alpha-blend a colormapped density map over the screenshot."""
    img = _load_image(image)
    values = as_values(density_map)
    if values.shape != (img.height, img.width):
        values = resize_bilinear(values, img.height, img.width)
    peak = values.max()
    norm = values / peak if peak > 0 else values
    cmap = matplotlib.colormaps[spec.colormap]
    heat = (cmap(norm)[:, :, :3] * 255).astype(np.uint8)
    base = np.asarray(img, dtype=np.float64)
    blended = (1 - spec.overlay_alpha) * base + spec.overlay_alpha * heat
    out = Image.fromarray(np.round(blended).astype(np.uint8), mode="RGB")
    with AtomicFile(out_path, "wb") as fh:
        out.save(fh, format="PNG")


def render_scanpath(image, scanpath: Scanpath, spec: RenderSpec, out_path):
    """Numbered fixation circles connected by saccade lines."""
    img = _load_image(image)
    draw = ImageDraw.Draw(img)
    pts = [(f.x, f.y) for f in scanpath.fixations]
    if len(pts) > 1:
        draw.line(pts, fill=(255, 255, 0), width=2)
    r = spec.marker_radius
    for i, (x, y) in enumerate(pts):
        draw.ellipse([x - r, y - r, x + r, y + r], outline=(255, 0, 0),
                     width=2, fill=(255, 255, 255))
        if spec.numbering:
            draw.text((x - 3, y - 6), str(i + 1), fill=(0, 0, 0))
    with AtomicFile(out_path, "wb") as fh:
        img.save(fh, format="PNG")
