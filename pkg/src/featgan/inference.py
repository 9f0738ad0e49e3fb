"""Detection inference: proposals -> scored, NMS-filtered detections.

Each proposal yields at most one detection: its argmax non-background class,
scored by that class's softmax probability, with the box refined by the
class-specific regression offsets. With use_generator the pooled conv5
feature is super-resolved (eval-mode residual) before the perception branch;
the same code path with use_generator=False is the no-generator baseline.
"""

import numpy as np

from . import backbone as bb
from . import discriminator as disc
from . import generator as gen
from . import roi
from .backbone import STRIDES
from .evaluation import DetectionRecord, nms
from .losses import bbox_decode


def detect_image(image, proposals, state, mconfig, use_generator,
                 nms_iou=0.3):
    if not proposals:
        return []
    pyramid, _ = bb.forward(bb.prepare_image(image), state.backbone)
    boxes = [p.box for p in proposals]
    pooled5, _ = roi.pool_boxes(pyramid.levels["conv5"], boxes,
                                STRIDES["conv5"], mconfig.roi_out)
    feats = pooled5
    if use_generator:
        gcfg = mconfig.generator
        level = mconfig.input_level
        pooledf, _ = roi.pool_boxes(pyramid.levels[level], boxes,
                                    STRIDES[level], mconfig.roi_out)
        residual, _ = gen.forward(pooledf, state.generator, gcfg, train=False)
        feats = gen.super_resolve(pooled5, residual)

    probs, _, reg, _ = disc.perception_forward(feats, state.perception,
                                               mconfig.discriminator)
    detections = []
    for i, p in enumerate(proposals):
        cls = int(np.argmax(probs[i]))
        if cls == 0:
            continue
        offsets = reg[i, 4 * (cls - 1):4 * cls]
        box = bbox_decode(p.box, offsets)
        detections.append(DetectionRecord(image_id=p.image_id, box=box,
                                          class_id=cls,
                                          score=float(probs[i, cls])))
    return nms(detections, nms_iou)


def run_inference(dataset, state, mconfig, use_generator, nms_iou=0.3):
    """All images of a dataset -> flat DetectionRecord list."""
    detections = []
    for image_id in dataset.image_ids:
        detections.extend(detect_image(
            dataset.images[image_id], dataset.proposals.get(image_id, []),
            state, mconfig, use_generator, nms_iou))
    return detections
