"""Feature visualization: four-panel grids per sampled small proposal.

Panels left to right: conv5 pool of the small object, the learned residual,
the super-resolved sum, and the conv5 pool of a large object from the same
image. Each panel is the channel mean, min-max normalized independently to
8-bit, nearest-upscaled, and the panels are tiled with a 2-px separator.
"""

import numpy as np

from . import backbone as bb
from . import generator as gen
from . import roi
from .backbone import STRIDES
from .dataio import write_ppm

PANEL_SCALE = 12
SEPARATOR = 2


def panel(values, scale=PANEL_SCALE):
    """[C,h,w] feature -> channel-mean heat panel, uint8 [h*scale, w*scale]."""
    m = np.asarray(values, dtype=np.float64).mean(axis=0)
    lo, hi = float(m.min()), float(m.max())
    norm = np.zeros_like(m) if hi == lo else (m - lo) / (hi - lo)
    img = np.rint(norm * 255.0).astype(np.uint8)
    return np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)


def grid(panels, sep=SEPARATOR):
    h = panels[0].shape[0]
    cols = []
    for i, p in enumerate(panels):
        if i:
            cols.append(np.full((h, sep), 255, dtype=np.uint8))
        cols.append(p)
    return np.concatenate(cols, axis=1)


def write_feature_grids(out_dir, dataset, state, mconfig, mean_area,
                        max_images=4):
    """One grid PPM per sampled small-fg proposal; returns written paths."""
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    gcfg = mconfig.generator
    level = mconfig.input_level
    written = []
    for image_id in dataset.image_ids[:max_images]:
        proposals = dataset.proposals.get(image_id, [])
        annotations = dataset.annotations.get(image_id, [])
        small = [p for p in proposals
                 if p.label != 0 and p.matched_gt is not None
                 and annotations[p.matched_gt].area < mean_area]
        large = [p for p in proposals
                 if p.label != 0 and p.matched_gt is not None
                 and annotations[p.matched_gt].area >= mean_area]
        if not small or not large:
            continue
        pyramid, _ = bb.forward(bb.prepare_image(dataset.images[image_id]),
                                state.backbone)
        s_box, l_box = small[0].box, large[0].box
        pooled5, _ = roi.pool_boxes(pyramid.levels["conv5"], [s_box, l_box],
                                    STRIDES["conv5"], mconfig.roi_out)
        pooledf, _ = roi.pool_boxes(pyramid.levels[level], [s_box],
                                    STRIDES[level], mconfig.roi_out)
        residual, _ = gen.forward(pooledf, state.generator, gcfg, train=False)
        super_feat = pooled5[0] + residual[0]
        img = grid([panel(pooled5[0]), panel(residual[0]),
                    panel(super_feat), panel(pooled5[1])])
        path = out / f"features_img_{image_id}.ppm"
        write_ppm(path, img)
        written.append(path)
    return written
