"""Command-line entry point.

Commands: gen-data, pretrain, train-gan, eval, viz-features, ablate.
Every artifact lands under --out (or the config's out_dir); nothing written
carries a timestamp, so re-running a command with the same config and seed
into a fresh directory is bit-identical.

Exit codes: 0 success, 1 runtime failure, 2 usage or config error.
"""

import argparse
import sys
from pathlib import Path

from . import dataio, datasynth, evaluation, trainer as tr, viz
from .config import apply_overrides, load_config, save_config
from .inference import run_inference
from .trainer import TrainLog, Trainer, TrainingDiverged


class UsageError(Exception):
    pass


def _load_run_config(args):
    if not args.config:
        raise UsageError("--config <path> is required")
    path = Path(args.config)
    if not path.exists():
        raise UsageError(f"config file not found: {path}")
    cfg = load_config(path)
    overrides = list(args.set or [])
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out is not None:
        overrides.append(f"out_dir={args.out}")
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg


def _data_dirs(cfg):
    root = Path(cfg.out_dir) / "data"
    return root / "train", root / "test"


def _generate_split(cfg, start, count, out_dir):
    scene = cfg.scene
    jitter = cfg.data.jitter()
    images, annotations, proposals = {}, {}, {}
    for index in range(start, start + count):
        image, anns = datasynth.generate_scene(scene, index)
        images[index] = image
        annotations[index] = anns
        proposals[index] = datasynth.generate_proposals(
            anns, jitter, cfg.data.negatives_per_image,
            seed=(scene.seed, 7, index), image_size=scene.image_size,
            image_id=index)
    dataio.save_dataset(out_dir, images, annotations, proposals)


def cmd_gen_data(cfg):
    train_dir, test_dir = _data_dirs(cfg)
    _generate_split(cfg, 0, cfg.data.num_train, train_dir)
    _generate_split(cfg, cfg.data.num_train, cfg.data.num_test, test_dir)
    save_config(Path(cfg.out_dir) / "config.json", cfg)
    print(f"wrote {cfg.data.num_train} train / {cfg.data.num_test} test images "
          f"under {Path(cfg.out_dir) / 'data'}")
    return 0


def _require_data(cfg):
    train_dir, test_dir = _data_dirs(cfg)
    if not (train_dir / "annotations.json").exists():
        cmd_gen_data(cfg)
    return dataio.load_dataset(train_dir), dataio.load_dataset(test_dir)


def cmd_pretrain(cfg):
    train_set, _ = _require_data(cfg)
    state = tr.init_state(cfg.model, cfg.train.seed)
    t = Trainer(train_set, state, cfg.model, cfg.train)
    t.pretrain_perception()
    out = Path(cfg.out_dir)
    tr.save_state(out / "pretrain.ckpt", state)
    t.log.write(out / "pretrain_log.csv")
    print(f"pretrained {cfg.train.phase1_iters} iterations -> "
          f"{out / 'pretrain.ckpt'}")
    return 0


def cmd_train_gan(cfg, resume=None):
    train_set, _ = _require_data(cfg)
    out = Path(cfg.out_dir)
    if resume:
        state = tr.load_state(resume)
    elif (out / "pretrain.ckpt").exists():
        state = tr.load_state(out / "pretrain.ckpt")
    else:
        state = tr.init_state(cfg.model, cfg.train.seed)
    t = Trainer(train_set, state, cfg.model, cfg.train)
    t.pretrain_perception()  # no-op when the counters say phase 1 is done
    t.alternate()
    tr.save_state(out / "model.ckpt", state)
    t.log.write(out / "train_log.csv")
    print(f"trained to round {state.counters['round']} -> {out / 'model.ckpt'}")
    return 0


def cmd_eval(cfg):
    _, test_set = _require_data(cfg)
    out = Path(cfg.out_dir)
    ckpt = out / cfg.eval.checkpoint
    if not ckpt.exists():
        raise UsageError(f"checkpoint not found: {ckpt}")
    state = tr.load_state(ckpt)
    detections = run_inference(test_set, state, cfg.model,
                               use_generator=cfg.eval.use_generator,
                               nms_iou=cfg.eval.nms_iou)
    gts = test_set.all_annotations()
    name = cfg.eval.report_name
    evaluation.write_metrics_csv(out / f"{name}.csv", detections, gts,
                                 cfg.eval.iou_thresh)
    evaluation.write_curve_csv(out / f"{name}_curve.csv", detections, gts,
                               cfg.eval.iou_thresh)
    lamr = evaluation.log_average_miss_rate(
        detections, gts, num_images=len(test_set.image_ids),
        iou_thresh=cfg.eval.iou_thresh)
    line = f"lamr={lamr!r}"
    (out / f"{name}_lamr.txt").write_text(line + "\n")
    print(line)
    return 0


def cmd_viz_features(cfg):
    train_set, _ = _require_data(cfg)
    out = Path(cfg.out_dir)
    ckpt = out / cfg.eval.checkpoint
    if not ckpt.exists():
        raise UsageError(f"checkpoint not found: {ckpt}")
    state = tr.load_state(ckpt)
    written = viz.write_feature_grids(out / "viz", train_set, state, cfg.model,
                                      tr.split_threshold(train_set))
    print(f"wrote {len(written)} feature grids under {out / 'viz'}")
    return 0


def _bucket_metrics(detections, gts, iou_thresh):
    row = []
    for bucket in (evaluation.SizeBucket.SMALL, evaluation.SizeBucket.MEDIUM,
                   evaluation.SizeBucket.LARGE):
        r, a = evaluation.recall_accuracy(detections, gts, iou_thresh, bucket)
        row += [r, a]
    return row


def cmd_ablate(cfg):
    """Variant matrix: no-generator baseline, then input_level sweep."""
    train_set, test_set = _require_data(cfg)
    out = Path(cfg.out_dir)
    gts = test_set.all_annotations()

    state0 = tr.init_state(cfg.model, cfg.train.seed)
    t = Trainer(train_set, state0, cfg.model, cfg.train)
    t.pretrain_perception()
    tr.save_state(out / "pretrain.ckpt", state0)

    rows = []

    def add_row(variant, level, alternation, state, use_generator, mconfig):
        dets = run_inference(test_set, state, mconfig,
                             use_generator=use_generator,
                             nms_iou=cfg.eval.nms_iou)
        lamr = evaluation.log_average_miss_rate(
            dets, gts, num_images=len(test_set.image_ids),
            iou_thresh=cfg.eval.iou_thresh)
        rows.append([variant, level, alternation]
                    + _bucket_metrics(dets, gts, cfg.eval.iou_thresh) + [lamr])

    add_row("baseline", "-", "off", state0, False, cfg.model)

    for level in ("conv1", "conv2", "conv3"):
        mconfig = tr.ModelConfig(
            channels=cfg.model.channels, num_classes=cfg.model.num_classes,
            roi_out=cfg.model.roi_out, gen_blocks=cfg.model.gen_blocks,
            input_level=level, hidden=cfg.model.hidden)
        state = tr.load_state(out / "pretrain.ckpt")
        fresh = tr.init_state(mconfig, cfg.train.seed)
        state.generator = fresh.generator  # input width depends on the level
        state.velocities["generator"] = fresh.velocities["generator"]
        tv = Trainer(train_set, state, mconfig, cfg.train)
        tv.alternate()
        add_row(f"alt_{level}", level, "on", state, True, mconfig)

    with open(out / "ablation.csv", "w") as fh:
        fh.write("variant,input_level,alternation,small_recall,small_accuracy,"
                 "medium_recall,medium_accuracy,large_recall,large_accuracy,"
                 "lamr\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    print(f"wrote {out / 'ablation.csv'} ({len(rows)} variants)")
    return 0


COMMANDS = {
    "gen-data": cmd_gen_data,
    "pretrain": cmd_pretrain,
    "train-gan": cmd_train_gan,
    "eval": cmd_eval,
    "viz-features": cmd_viz_features,
    "ablate": cmd_ablate,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="featgan",
        description="Small-object detection via adversarial feature "
                    "super-resolution on synthetic scenes.")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="path to the JSON run config")
    parser.add_argument("--out", help="output directory (overrides out_dir)")
    parser.add_argument("--seed", type=int, help="run seed (cascades)")
    parser.add_argument("--set", action="append", metavar="KEY=VALUE",
                        help="config override, repeatable (e.g. "
                             "train.learning_rate=0.01)")
    parser.add_argument("--resume", help="checkpoint to continue from "
                                         "(train-gan only)")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _load_run_config(args)
        Path(cfg.out_dir).mkdir(parents=True, exist_ok=True)
        if args.command == "train-gan":
            return cmd_train_gan(cfg, resume=args.resume)
        return COMMANDS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 2
    except (KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"training failure: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
