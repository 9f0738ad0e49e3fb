"""Deterministic synthetic detection scenes.

Scenes are 8-bit grayscale images containing bright class-distinctive glyphs
(one procedural shape per class) over a noisy, lightly cluttered background.
Instance sides are square integers drawn from either the small or the large
side range; kinds alternate deterministically (even placement index -> small)
so any scene with at least two instances contains both kinds. Everything is a
pure function of (config, image_index) / the explicit seed.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .evaluation import iou

MAX_GLYPH_CLASSES = 6


class PlacementError(RuntimeError):
    """Raised when a scene cannot be placed within the retry budget."""


@dataclass(frozen=True)
class SceneConfig:
    image_size: int = 480
    num_classes: int = 3
    instances_per_image: tuple = (4, 6)
    small_side_range: tuple = (12, 20)
    large_side_range: tuple = (96, 120)
    clutter_density: float = 0.05
    noise_sigma: float = 0.02
    seed: int = 0

    def validate(self):
        if self.num_classes < 1:
            raise ValueError("num_classes must be >= 1")
        if self.num_classes > MAX_GLYPH_CLASSES:
            raise ValueError(
                f"at most {MAX_GLYPH_CLASSES} glyph classes are available"
            )
        if self.small_side_range[1] >= self.large_side_range[0]:
            raise ValueError("small_side_range max must be < large_side_range min")
        if self.image_size < 4 * self.large_side_range[1]:
            raise ValueError("image_size must be >= 4x the largest side")
        lo, hi = self.instances_per_image
        if not (1 <= lo <= hi):
            raise ValueError("instances_per_image must be an increasing range >= 1")
        if not (0.0 <= self.clutter_density <= 1.0):
            raise ValueError("clutter_density must lie in [0,1]")


@dataclass(frozen=True)
class Annotation:
    image_id: int
    box: tuple  # (x1, y1, x2, y2), corner-exclusive pixels
    class_id: int

    @property
    def area(self):
        x1, y1, x2, y2 = self.box
        return (x2 - x1) * (y2 - y1)


@dataclass(frozen=True)
class Proposal:
    image_id: int
    box: tuple
    label: int  # 0 = background
    matched_gt: Optional[int] = None  # index into the image's annotations


@dataclass(frozen=True)
class JitterParams:
    n_pos: int = 6
    max_shift_frac: float = 0.15  # of the box side, per axis
    scale_range: tuple = (0.85, 1.2)

    def validate(self):
        if self.max_shift_frac >= 0.5 or self.max_shift_frac < 0:
            raise ValueError("max_shift_frac must lie in [0, 0.5)")
        lo, hi = self.scale_range
        if not (0.5 < lo <= hi < 1.5):
            raise ValueError("scale_range must stay within (0.5, 1.5)")
        if self.n_pos < 1:
            raise ValueError("n_pos must be >= 1")


# ---------------------------------------------------------------------------
# glyph painters: each draws its shape at intensity v into a side x side tile


def _grid(side):
    return np.mgrid[0:side, 0:side]


def _glyph_disk(side):
    yy, xx = _grid(side)
    c = (side - 1) / 2.0
    r = side / 2.0 - 0.5
    return (yy - c) ** 2 + (xx - c) ** 2 <= r * r


def _glyph_frame(side):
    t = max(2, side // 6)
    m = np.zeros((side, side), dtype=bool)
    m[:t, :] = m[-t:, :] = m[:, :t] = m[:, -t:] = True
    return m


def _glyph_cross(side):
    yy, xx = _grid(side)
    t = max(1, side // 6)
    return (np.abs(yy - xx) <= t) | (np.abs(yy + xx - (side - 1)) <= t)


def _glyph_triangle(side):
    yy, xx = _grid(side)
    c = (side - 1) / 2.0
    return np.abs(xx - c) <= (yy + 1) * 0.5


def _glyph_bars(side):
    yy, _ = _grid(side)
    t = max(2, side // 5)
    return (yy // t) % 2 == 0


def _glyph_checker(side):
    yy, xx = _grid(side)
    t = max(2, side // 4)
    return ((yy // t) + (xx // t)) % 2 == 0


_GLYPHS = (_glyph_disk, _glyph_frame, _glyph_cross,
           _glyph_triangle, _glyph_bars, _glyph_checker)


def draw_glyph(canvas, box, class_id, intensity):
    x1, y1, x2, y2 = box
    side = x2 - x1
    mask = _GLYPHS[(class_id - 1) % len(_GLYPHS)](side)
    tile = canvas[y1:y2, x1:x2]
    tile[mask] = intensity


# ---------------------------------------------------------------------------


def _place_boxes(rng, image_size, sides, margin=2, tries_per_box=200):
    """Place non-overlapping square boxes; raises PlacementError on failure."""
    boxes = []
    for side in sides:
        for attempt in range(tries_per_box):
            x1 = int(rng.integers(0, image_size - side + 1))
            y1 = int(rng.integers(0, image_size - side + 1))
            cand = (x1 - margin, y1 - margin, x1 + side + margin, y1 + side + margin)
            if all(iou(cand, b) == 0.0 for b in boxes):
                boxes.append(cand)
                break
        else:
            raise PlacementError(
                f"could not place a {side}px instance after {tries_per_box} tries; "
                "config is over-dense"
            )
    return [(x1 + margin, y1 + margin, x2 - margin, y2 - margin)
            for (x1, y1, x2, y2) in boxes]


def _add_clutter(canvas, rng, density, keepout):
    h, w = canvas.shape
    mean_area = 14 * 14
    count = int(round(density * h * w / mean_area))
    for _ in range(count):
        cw = int(rng.integers(5, 24))
        ch = int(rng.integers(5, 24))
        x1 = int(rng.integers(0, w - cw))
        y1 = int(rng.integers(0, h - ch))
        box = (x1, y1, x1 + cw, y1 + ch)
        if any(iou(box, k) > 0.0 for k in keepout):
            continue
        canvas[y1:y1 + ch, x1:x1 + cw] = rng.uniform(0.3, 0.55)


def generate_scene(config: SceneConfig, image_index: int):
    """Render one scene; returns (uint8 image [H,W], list of Annotation)."""
    config.validate()
    if image_index < 0:
        raise ValueError("image_index must be >= 0")
    rng = np.random.default_rng((config.seed, image_index))
    n = int(rng.integers(config.instances_per_image[0],
                         config.instances_per_image[1] + 1))
    sides = []
    for i in range(n):
        lo, hi = (config.small_side_range if i % 2 == 0
                  else config.large_side_range)
        sides.append(int(rng.integers(lo, hi + 1)))

    boxes = _place_boxes(rng, config.image_size, sides)
    canvas = np.full((config.image_size, config.image_size), 0.15, dtype=np.float64)
    if config.noise_sigma > 0:
        canvas += rng.normal(0.0, config.noise_sigma, size=canvas.shape)
    _add_clutter(canvas, rng, config.clutter_density, boxes)

    annotations = []
    for box in boxes:
        class_id = int(rng.integers(1, config.num_classes + 1))
        intensity = float(rng.uniform(0.75, 0.95))
        draw_glyph(canvas, box, class_id, intensity)
        annotations.append(Annotation(image_id=image_index, box=box,
                                      class_id=class_id))
    image = np.clip(np.rint(canvas * 255.0), 0, 255).astype(np.uint8)
    return image, annotations


def split_by_size(annotations):
    """Partition by area against the mean area; ties at the mean go large."""
    if not annotations:
        raise ValueError("cannot split an empty annotation list")
    mean_area = sum(a.area for a in annotations) / len(annotations)
    small = [a for a in annotations if a.area < mean_area]
    large = [a for a in annotations if a.area >= mean_area]
    return small, large


def _jittered_box(rng, box, jitter, image_size):
    x1, y1, x2, y2 = box
    w, h = x2 - x1, y2 - y1
    scale = rng.uniform(*jitter.scale_range)
    dx = rng.uniform(-jitter.max_shift_frac, jitter.max_shift_frac) * w
    dy = rng.uniform(-jitter.max_shift_frac, jitter.max_shift_frac) * h
    cx, cy = (x1 + x2) / 2.0 + dx, (y1 + y2) / 2.0 + dy
    nw, nh = max(2.0, w * scale), max(2.0, h * scale)
    nx1 = int(np.clip(round(cx - nw / 2.0), 0, image_size - 2))
    ny1 = int(np.clip(round(cy - nh / 2.0), 0, image_size - 2))
    nx2 = int(np.clip(round(cx + nw / 2.0), nx1 + 1, image_size))
    ny2 = int(np.clip(round(cy + nh / 2.0), ny1 + 1, image_size))
    return (nx1, ny1, nx2, ny2)


def _label_for(box, annotations):
    best, best_iou = None, 0.0
    for idx, ann in enumerate(annotations):
        v = iou(box, ann.box)
        if v > best_iou:
            best, best_iou = idx, v
    if best is not None and best_iou >= 0.5:
        return annotations[best].class_id, best
    return 0, None


def generate_proposals(annotations, jitter: JitterParams, negatives_per_image,
                       seed, image_size, image_id=None):
    """Jittered positives per annotation plus clean random negatives.

    Positive copies are labeled by the IoU >= 0.5 rule against all ground
    truths of the image; negatives are drawn until IoU < 0.3 against every
    ground truth. Deterministic in `seed`.
    """
    jitter.validate()
    if image_id is None:
        image_id = annotations[0].image_id if annotations else 0
    rng = np.random.default_rng(seed)
    proposals = []
    for ann in annotations:
        if jitter.n_pos >= 1:
            label, idx = _label_for(ann.box, annotations)
            proposals.append(Proposal(image_id, ann.box, label, idx))
        for _ in range(jitter.n_pos - 1):
            box = _jittered_box(rng, ann.box, jitter, image_size)
            label, idx = _label_for(box, annotations)
            proposals.append(Proposal(image_id, box, label, idx))

    placed = 0
    tries = 0
    max_tries = 200 * max(1, negatives_per_image)
    while placed < negatives_per_image and tries < max_tries:
        tries += 1
        side = int(rng.integers(8, max(10, image_size // 3)))
        x1 = int(rng.integers(0, image_size - side + 1))
        y1 = int(rng.integers(0, image_size - side + 1))
        box = (x1, y1, x1 + side, y1 + side)
        if all(iou(box, a.box) < 0.3 for a in annotations):
            proposals.append(Proposal(image_id, box, 0, None))
            placed += 1
    if placed < negatives_per_image:
        raise PlacementError("could not draw enough low-overlap negatives")
    return proposals
