"""Checkpoint container: one JSON manifest line, then raw float32 buffers.

Layout: `{"format":"PGAN","version":1,"arrays":[...],"counters":{...}}\n`
followed by each array's little-endian float32 bytes. `byte_offset` is
relative to the first byte after the newline. Reload is bit-exact; a
round-trip therefore preserves training-replay determinism.
"""

import json

import numpy as np

from .params import ParamSet

FORMAT = "PGAN"
VERSION = 1


def save_checkpoint(path, param_sets, counters=None):
    """param_sets: {"backbone": ParamSet, ...}; velocities use vel/<set>/<name>."""
    entries = []
    blobs = []
    offset = 0
    for set_name in sorted(param_sets):
        pset = param_sets[set_name]
        for name, arr in pset.items():
            a = np.ascontiguousarray(arr, dtype="<f4")
            full = f"{set_name}/{name}"
            entries.append({"name": full, "shape": list(a.shape),
                            "dtype": "f32", "byte_offset": offset})
            blobs.append(a.tobytes())
            offset += a.nbytes
    manifest = {"format": FORMAT, "version": VERSION, "arrays": entries,
                "counters": dict(counters or {})}
    with open(path, "wb") as fh:
        fh.write(json.dumps(manifest, sort_keys=True, separators=(",", ":"))
                 .encode("ascii"))
        fh.write(b"\n")
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path):
    """-> ({set_name: ParamSet}, counters dict)."""
    with open(path, "rb") as fh:
        header = fh.readline()
        manifest = json.loads(header.decode("ascii"))
        if manifest.get("format") != FORMAT:
            raise ValueError(f"not a {FORMAT} checkpoint: {path}")
        if manifest.get("version") != VERSION:
            raise ValueError(f"unsupported checkpoint version {manifest.get('version')}")
        base = fh.tell()
        param_sets = {}
        for entry in manifest["arrays"]:
            if entry["dtype"] != "f32":
                raise ValueError(f"unsupported dtype {entry['dtype']!r}")
            fh.seek(base + entry["byte_offset"])
            shape = tuple(entry["shape"])
            count = int(np.prod(shape, dtype=np.int64)) if shape else 1
            raw = fh.read(4 * count)
            if len(raw) != 4 * count:
                raise ValueError(f"truncated checkpoint at {entry['name']}")
            arr = np.frombuffer(raw, dtype="<f4").reshape(shape).copy()
            set_name, _, param_name = entry["name"].partition("/")
            param_sets.setdefault(set_name, ParamSet())[param_name] = arr
    return param_sets, manifest.get("counters", {})
