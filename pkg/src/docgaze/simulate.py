"""Foveated belief-state scanpath generation on a 20x32 action grid.

The viewer's internal state is a stack of component belief channels plus
a static layout channel. Fixating a cell swaps the circular neighborhood
of the low-resolution beliefs for their high-resolution counterparts
(cumulatively), and Inhibition-of-Return forbids revisits.
"""

from dataclasses import dataclass
from typing import Dict, Optional, Protocol, Tuple

import numpy as np

from .density import DensityMap, Fixation, Scanpath, as_values
from .kernels import block_mean, gaussian_blur, resize_bilinear
from .layout import COMPONENTS, LABEL_BANNER, LABEL_IMAGE, LABEL_TEXT, SegmentationMap

GRID_ROWS = 20
GRID_COLS = 32
N_ACTIONS = GRID_ROWS * GRID_COLS
STATE_H = 320
STATE_W = 480

DEFAULT_FOVEA_RADIUS = 3.0  # grid cells, ~1 visual degree at 50 px/degree
DEFAULT_LOWRES_SIGMA = 64.0  # px blur standing in for peripheral input
LAYOUT_WEIGHTS = {"image": 0.5, "text": 0.35, "banner": 0.15}


def cell_to_rc(cell: int) -> Tuple[int, int]:
    if not 0 <= cell < N_ACTIONS:
        raise ValueError(f"invalid action id {cell}")
    return cell // GRID_COLS, cell % GRID_COLS


def rc_to_cell(row: int, col: int) -> int:
    return row * GRID_COLS + col


def cell_center(cell: int, width: float, height: float) -> Tuple[float, float]:
    """Pixel-space center of a grid cell for an image of the given size."""
    row, col = cell_to_rc(cell)
    return (col + 0.5) * width / GRID_COLS, (row + 0.5) * height / GRID_ROWS


def point_to_cell(x: float, y: float, width: float, height: float) -> int:
    col = min(int(x * GRID_COLS / width), GRID_COLS - 1)
    row = min(int(y * GRID_ROWS / height), GRID_ROWS - 1)
    return rc_to_cell(row, col)


def discretize(m) -> np.ndarray:
    """Resample a map to the state size and average into grid cells."""
    v = resize_bilinear(as_values(m), STATE_H, STATE_W)
    return block_mean(v, GRID_ROWS, GRID_COLS)


def belief_channels(component_maps: Dict[str, "DensityMap"]) -> np.ndarray:
    """Stack component maps into (5, 20, 32) channels, max-normalized."""
    channels = np.zeros((len(COMPONENTS), GRID_ROWS, GRID_COLS))
    for i, comp in enumerate(COMPONENTS):
        if comp not in component_maps:
            continue
        grid = discretize(component_maps[comp])
        peak = grid.max()
        channels[i] = grid / peak if peak > 0 else grid
    return channels


def layout_channel(
    seg: SegmentationMap, weights: Dict[str, float] = LAYOUT_WEIGHTS
) -> np.ndarray:
    """Scalar per-cell layout signal from label area fractions."""
    out = np.zeros((GRID_ROWS, GRID_COLS))
    for name, label in (("image", LABEL_IMAGE), ("text", LABEL_TEXT),
                        ("banner", LABEL_BANNER)):
        frac = discretize((seg.labels == label).astype(np.float64))
        out += weights[name] * frac
    return out


def lowres_channels(
    component_maps: Dict[str, "DensityMap"], sigma: float = DEFAULT_LOWRES_SIGMA
) -> np.ndarray:
    """Peripheral-vision beliefs: blur each map before discretizing."""
    blurred = {
        comp: DensityMap(gaussian_blur(as_values(m), sigma))
        for comp, m in component_maps.items()
    }
    return belief_channels(blurred)


@dataclass(frozen=True)
class BeliefState:
    channels: np.ndarray  # (6, 20, 32): 5 component beliefs + layout
    visited: frozenset
    t: int

    def __post_init__(self):
        ch = np.asarray(self.channels, dtype=np.float64)
        if ch.shape != (6, GRID_ROWS, GRID_COLS):
            raise ValueError(f"expected (6, {GRID_ROWS}, {GRID_COLS}) channels, "
                             f"got {ch.shape}")
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "visited", frozenset(self.visited))

    @property
    def component_channels(self) -> np.ndarray:
        return self.channels[:5]

    @property
    def layout(self) -> np.ndarray:
        return self.channels[5]

    def visited_mask(self) -> np.ndarray:
        mask = np.zeros(N_ACTIONS, dtype=bool)
        if self.visited:
            mask[sorted(self.visited)] = True
        return mask


def init_belief(low_res_components: np.ndarray, layout: np.ndarray) -> BeliefState:
    """Initial state: peripheral beliefs plus the static layout channel."""
    comp = np.asarray(low_res_components, dtype=np.float64)
    if comp.shape != (5, GRID_ROWS, GRID_COLS):
        raise ValueError("expected 5 component channels")
    layout = np.asarray(layout, dtype=np.float64)
    if layout.shape != (GRID_ROWS, GRID_COLS):
        raise ValueError("bad layout channel shape")
    return BeliefState(
        channels=np.concatenate([comp, layout[np.newaxis]]), visited=frozenset(),
        t=0,
    )


def circular_mask(cell: int, radius: float) -> np.ndarray:
    """Boolean (20, 32) mask of cells within ``radius`` of the cell center."""
    row, col = cell_to_rc(cell)
    rr, cc = np.mgrid[0:GRID_ROWS, 0:GRID_COLS]
    return (rr - row) ** 2 + (cc - col) ** 2 <= radius**2


def foveate_update(
    b: BeliefState, cell: int, radius: float, high_res: np.ndarray
) -> BeliefState:
    """Swap in high-resolution beliefs inside the fixated circle.

    The layout channel is never touched; masks accumulate across fixations
    because already-replaced cells keep their high-res values.
    """
    high = np.asarray(high_res, dtype=np.float64)
    if high.shape != (5, GRID_ROWS, GRID_COLS):
        raise ValueError("expected 5 high-res channels")
    mask = circular_mask(cell, radius)
    channels = b.channels.copy()
    channels[:5] = np.where(mask[np.newaxis], high, channels[:5])
    return BeliefState(
        channels=channels, visited=b.visited | {cell}, t=b.t + 1
    )


class Policy(Protocol):
    def action_distribution(self, b: BeliefState) -> np.ndarray:
        """Probability vector over the 640 actions; zero on visited cells."""
        ...


class WTAPolicy:
    """Winner-take-all over a fixed saliency grid; ties go to the lowest
    action id."""

    def __init__(self, grid: np.ndarray):
        grid = np.asarray(grid, dtype=np.float64)
        if grid.shape != (GRID_ROWS, GRID_COLS):
            raise ValueError("expected a 20x32 grid")
        self.scores = grid.ravel()

    def action_distribution(self, b: BeliefState) -> np.ndarray:
        scores = self.scores.copy()
        scores[b.visited_mask()] = -np.inf
        dist = np.zeros(N_ACTIONS)
        dist[int(np.argmax(scores))] = 1.0
        return dist


def wta_policy(final_fdm) -> WTAPolicy:
    return WTAPolicy(discretize(final_fdm))


def rollout(
    policy: Policy,
    b0: BeliefState,
    high_res: np.ndarray,
    T: int,
    radius: float = DEFAULT_FOVEA_RADIUS,
    rng_seed: int = 0,
    image_size: Optional[Tuple[int, int]] = None,
    image_id: str = "",
    subject_id: str = "model",
):
    """Sample T distinct fixations, foveating after each.

    Returns (actions, scanpath); scanpath coordinates are the pixel
    centers of the chosen cells for ``image_size`` = (width, height),
    defaulting to the state resolution.
    """
    if T < 1:
        raise ValueError("T must be >= 1")
    if T > N_ACTIONS:
        raise ValueError(f"T={T} exceeds the {N_ACTIONS}-cell grid")
    rng = np.random.default_rng(rng_seed)
    width, height = image_size if image_size else (STATE_W, STATE_H)
    b = b0
    actions = []
    fixations = []
    for t in range(T):
        dist = np.asarray(policy.action_distribution(b), dtype=np.float64)
        visited = b.visited_mask()
        dist = np.where(visited, 0.0, dist)
        total = dist.sum()
        if total <= 0:
            # degenerate policy: fall back to uniform over unvisited cells
            dist = np.where(visited, 0.0, 1.0)
            total = dist.sum()
        dist = dist / total
        cell = int(rng.choice(N_ACTIONS, p=dist))
        actions.append(cell)
        x, y = cell_center(cell, width, height)
        fixations.append(Fixation(x=x, y=y, duration_ms=0.0, index=t))
        b = foveate_update(b, cell, radius, high_res)
    path = Scanpath(image_id=image_id, subject_id=subject_id,
                    fixations=tuple(fixations))
    return actions, path
