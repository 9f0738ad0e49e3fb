"""Dataset directory I/O.

A dataset directory holds `img_<index>.ppm` (binary P6, grayscale replicated
across RGB), `annotations.json` (array of {image_id, box, class_id}) and
`proposals.json` (array of {image_id, box, label}). matched_gt references are
not serialized; they are re-derived on load by argmax IoU, which reproduces
the generator's own labeling rule deterministically.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datasynth import Annotation, Proposal
from .evaluation import iou


def write_ppm(path, image):
    """8-bit grayscale [H,W] -> binary P6 with replicated channels."""
    image = np.asarray(image)
    if image.dtype != np.uint8 or image.ndim != 2:
        raise ValueError("write_ppm expects a uint8 [H,W] image")
    h, w = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.repeat(image[:, :, None], 3, axis=2).tobytes())


def read_ppm(path):
    """Binary P6 -> uint8 [H,W] (first channel; files here are grayscale)."""
    data = Path(path).read_bytes()
    if not data.startswith(b"P6"):
        raise ValueError(f"{path}: not a binary P6 file")
    fields, pos = [], 2
    while len(fields) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":  # comment runs to end of line
            pos = data.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(int(data[start:pos]))
    pos += 1  # single whitespace byte after maxval
    w, h, maxval = fields
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=h * w * 3, offset=pos)
    return pixels.reshape(h, w, 3)[:, :, 0].copy()


# ---------------------------------------------------------------------------


def _match_annotation(box, annotations):
    best, best_iou = None, 0.0
    for idx, ann in enumerate(annotations):
        v = iou(box, ann.box)
        if v > best_iou:
            best, best_iou = idx, v
    return (best, best_iou) if best is not None else (None, 0.0)


@dataclass
class Dataset:
    images: dict          # image_id -> uint8 [H,W]
    annotations: dict     # image_id -> list of Annotation
    proposals: dict       # image_id -> list of Proposal

    @property
    def image_ids(self):
        return sorted(self.images)

    def all_annotations(self):
        return [a for i in self.image_ids for a in self.annotations.get(i, [])]


def save_dataset(out_dir, images, annotations, proposals):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for image_id in sorted(images):
        write_ppm(out / f"img_{image_id}.ppm", images[image_id])
    ann_rows = [{"image_id": a.image_id, "box": list(a.box), "class_id": a.class_id}
                for i in sorted(annotations) for a in annotations[i]]
    (out / "annotations.json").write_text(json.dumps(ann_rows, indent=1) + "\n")
    prop_rows = [{"image_id": p.image_id, "box": list(p.box), "label": p.label}
                 for i in sorted(proposals) for p in proposals[i]]
    (out / "proposals.json").write_text(json.dumps(prop_rows, indent=1) + "\n")


def load_dataset(data_dir) -> Dataset:
    root = Path(data_dir)
    ann_rows = json.loads((root / "annotations.json").read_text())
    annotations = {}
    for row in ann_rows:
        ann = Annotation(image_id=int(row["image_id"]), box=tuple(row["box"]),
                         class_id=int(row["class_id"]))
        annotations.setdefault(ann.image_id, []).append(ann)

    images = {}
    for path in sorted(root.glob("img_*.ppm")):
        image_id = int(path.stem.split("_", 1)[1])
        images[image_id] = read_ppm(path)

    proposals = {}
    prop_path = root / "proposals.json"
    if prop_path.exists():
        for row in json.loads(prop_path.read_text()):
            image_id = int(row["image_id"])
            box = tuple(row["box"])
            label = int(row["label"])
            idx, best = _match_annotation(box, annotations.get(image_id, []))
            matched = idx if (label != 0 and best >= 0.5) else None
            proposals.setdefault(image_id, []).append(
                Proposal(image_id=image_id, box=box, label=label,
                         matched_gt=matched))
    return Dataset(images=images, annotations=annotations, proposals=proposals)
