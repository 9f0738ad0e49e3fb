"""Run configuration: one JSON file drives every command.

Sections: scene (synthesis), data (splits and proposal jitter), model,
train, eval. Unknown keys are rejected at every nesting level so typos fail
loudly; `--set a.b=c` overrides parse through the same machinery.
"""

import json
from dataclasses import dataclass, field, fields

from .datasynth import JitterParams, SceneConfig
from .losses import LossWeights
from .trainer import ModelConfig, TrainConfig


@dataclass(frozen=True)
class DataConfig:
    num_train: int = 200
    num_test: int = 50
    n_pos: int = 6
    max_shift_frac: float = 0.15
    scale_range: tuple = (0.85, 1.2)
    negatives_per_image: int = 24

    def jitter(self) -> JitterParams:
        return JitterParams(n_pos=self.n_pos, max_shift_frac=self.max_shift_frac,
                            scale_range=tuple(self.scale_range))

    def validate(self):
        if self.num_train < 1 or self.num_test < 1:
            raise ValueError("split sizes must be >= 1")
        if self.negatives_per_image < 1:
            raise ValueError("negatives_per_image must be >= 1")
        self.jitter().validate()


@dataclass(frozen=True)
class EvalConfig:
    nms_iou: float = 0.3
    iou_thresh: float = 0.5
    use_generator: bool = True
    checkpoint: str = "model.ckpt"   # relative to out_dir
    report_name: str = "metrics"

    def validate(self):
        if not (0.0 <= self.nms_iou <= 1.0 and 0.0 < self.iou_thresh <= 1.0):
            raise ValueError("eval thresholds out of range")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 1
    out_dir: str = "runs/out"
    scene: SceneConfig = field(default_factory=SceneConfig)
    data: DataConfig = field(default_factory=DataConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def validate(self):
        self.scene.validate()
        self.data.validate()
        self.eval.validate()
        self.train.validate()
        if self.model.num_classes != self.scene.num_classes:
            raise ValueError("model.num_classes must equal scene.num_classes")
        return self


_SECTIONS = {"scene": SceneConfig, "data": DataConfig, "model": ModelConfig,
             "train": TrainConfig, "eval": EvalConfig}
_LISTY = ("instances_per_image", "small_side_range", "large_side_range",
          "scale_range", "channels", "roi_out", "hidden")


def _build(cls, raw, where):
    known = {f.name: f for f in fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        if key not in known:
            raise KeyError(f"unknown config key {where}{key!r}")
        if key == "weights":
            value = _build(LossWeights, value, f"{where}weights.")
        elif isinstance(value, list) and key in _LISTY:
            value = tuple(value)
        kwargs[key] = value
    return cls(**kwargs)


def config_from_dict(raw) -> RunConfig:
    kwargs = {}
    for key, value in raw.items():
        if key in _SECTIONS:
            kwargs[key] = _build(_SECTIONS[key], value, f"{key}.")
        elif key in ("seed", "out_dir"):
            kwargs[key] = value
        else:
            raise KeyError(f"unknown config key {key!r}")
    cfg = RunConfig(**kwargs)
    # the scene seed follows the run seed unless set explicitly
    if "scene" not in raw or "seed" not in raw.get("scene", {}):
        cfg = apply_overrides(cfg, [f"scene.seed={cfg.seed}"])
    if "train" not in raw or "seed" not in raw.get("train", {}):
        cfg = apply_overrides(cfg, [f"train.seed={cfg.seed}"])
    return cfg.validate()


def load_config(path) -> RunConfig:
    with open(path) as fh:
        return config_from_dict(json.load(fh))


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text  # bare strings (e.g. conv2) pass through


def apply_overrides(cfg: RunConfig, pairs) -> RunConfig:
    """pairs: ["train.learning_rate=0.01", "seed=3", ...] -> new RunConfig."""
    raw = _to_dict(cfg)
    for pair in pairs:
        if "=" not in pair:
            raise ValueError(f"override {pair!r} is not key=value")
        key, _, text = pair.partition("=")
        node = raw
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise KeyError(f"unknown config section {part!r} in {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise KeyError(f"unknown config key {key!r}")
        node[parts[-1]] = _parse_value(text)
        if key == "seed":  # run-level seed cascades as in config_from_dict
            node.setdefault("scene", {})["seed"] = node[parts[-1]]
            node.setdefault("train", {})["seed"] = node[parts[-1]]
    return config_from_dict_raw(raw)


def _to_dict(cfg: RunConfig):
    def section(obj):
        out = {}
        for f in fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, tuple):
                v = list(v)
            elif isinstance(v, LossWeights):
                v = {"w1": v.w1, "w2": v.w2}
            out[f.name] = v
        return out

    return {"seed": cfg.seed, "out_dir": cfg.out_dir,
            **{name: section(getattr(cfg, name)) for name in _SECTIONS}}


def config_from_dict_raw(raw) -> RunConfig:
    """Like config_from_dict but the dict is already fully expanded."""
    kwargs = {"seed": raw["seed"], "out_dir": raw["out_dir"]}
    for name, cls in _SECTIONS.items():
        kwargs[name] = _build(cls, raw[name], f"{name}.")
    return RunConfig(**kwargs).validate()


def save_config(path, cfg: RunConfig):
    with open(path, "w") as fh:
        json.dump(_to_dict(cfg), fh, indent=1, sort_keys=True)
        fh.write("\n")
