"""RoI max pooling: image-space boxes onto fixed h x w feature grids.

Box-to-cell mapping is floor on the start edge / ceil on the end edge, then
clipped so the window always holds at least one cell — sub-stride boxes
(small objects on conv5) still pool a real cell instead of an empty window.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels


@dataclass
class PooledFeature:
    values: np.ndarray  # [C,h,w]
    source_level: str
    proposal: Optional[object] = None


def box_to_cells(box, stride, height, width):
    """(x1,y1,x2,y2) pixels -> (r0,c0,r1,c1) half-open cell window."""
    x1, y1, x2, y2 = box
    if x2 <= x1 or y2 <= y1:
        raise ValueError(f"degenerate box {box!r}")
    if x2 <= 0 or y2 <= 0 or x1 >= width * stride or y1 >= height * stride:
        raise ValueError(f"box {box!r} lies fully outside the feature map")
    r0 = int(np.clip(np.floor(y1 / stride), 0, height - 1))
    c0 = int(np.clip(np.floor(x1 / stride), 0, width - 1))
    r1 = int(np.clip(np.ceil(y2 / stride), r0 + 1, height))
    c1 = int(np.clip(np.ceil(x2 / stride), c0 + 1, width))
    return r0, c0, r1, c1


def pool_boxes(fmap, boxes, stride, out_hw):
    """Pool many boxes from one [C,H,W] map.

    Returns (values [N,C,oh,ow], arg [N,C,oh,ow]); `arg` holds flat H*W
    argmax indices consumed by pool_backward.
    """
    c, h, w = fmap.shape
    oh, ow = out_hw
    cells = np.empty((len(boxes), 4), dtype=np.int64)
    for i, box in enumerate(boxes):
        cells[i] = box_to_cells(box, stride, h, w)
    return kernels.roi_maxpool_fwd(np.ascontiguousarray(fmap), cells, oh, ow)


def pool_backward(gout, arg, map_shape):
    c, h, w = map_shape
    return kernels.roi_maxpool_bwd(np.ascontiguousarray(gout), arg, c, h, w)


def roi_pool(fmap, box, stride, out_hw, source_level="conv5") -> PooledFeature:
    values, _ = pool_boxes(fmap, [box], stride, out_hw)
    return PooledFeature(values=values[0], source_level=source_level)
