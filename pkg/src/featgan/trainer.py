"""Three-phase training: perception pretraining, then generator/adversarial
alternation.

Determinism scheme: every stochastic choice draws from a fresh
np.random.default_rng((seed, phase_tag, step_index)) stream, so replay and
checkpoint-resume are bit-exact without serializing RNG state. Parameters
and velocities are float32 throughout (the checkpoint stores f32); loss
values are reduced in float64.
"""

from dataclasses import dataclass, field

import numpy as np

from . import backbone as bb
from . import discriminator as disc
from . import generator as gen
from . import losses, roi
from .backbone import BackboneConfig, STRIDES
from .checkpoint import load_checkpoint, save_checkpoint
from .discriminator import DiscriminatorConfig
from .generator import GeneratorConfig
from .losses import LossReport, LossWeights
from .params import ParamSet, sgd_momentum_step

# rng stream tags
RNG_INIT = 100
RNG_PRETRAIN = 1
RNG_GEN = 2
RNG_ADV = 3

LOG_HEADER = "iter,phase,L_a,L_dis_a,L_cls,L_loc,L_dis_p,L_dis"


class TrainingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    # two-timescale rule: the adversarial branch trains at lr * adv_lr_scale.
    # At 1.0 the 1:1 alternation limit-cycles (D overshoots, the generator
    # over-corrects and localization never settles); a slower D keeps its
    # decision boundary consistent between generator updates.
    adv_lr_scale: float = 0.1
    # After consolidate_frac of the alternation rounds the generator enters a
    # consolidation phase: batch norm switches from batch statistics to the
    # frozen running moments (the exact function used at inference) and the
    # zero-map penalty below turns on. Ordering matters — the small-object
    # residual has to form first; taxing the residual from the start makes
    # uniform shrinkage the cheapest descent direction and the generator
    # never learns to condition on content.
    consolidate_frac: float = 0.5
    # L2 penalty (mean over elements), active during consolidation, on the
    # residual emitted for large-subset foreground rows. Inference routes
    # every proposal through the generator, so large-object features must map
    # to a near-zero residual; the detection losses alone tolerate any
    # residual that keeps the frozen heads happy, and that slack is what
    # ruins large-box regression. The penalty pins the identity directly.
    zero_map_weight: float = 1.0
    # Zero-mean Gaussian noise (of this mean absolute magnitude) added to the
    # pooled conv5 features during phase-1 pretraining; 0 disables. Makes the
    # frozen perception branch tolerant of features near — not exactly on —
    # the raw manifold, at some cost in clean accuracy.
    pretrain_noise: float = 0.0
    # Functional-identity anchor on large-subset foreground rows: an MSE
    # penalty between the perception head's outputs (class logits and box
    # offsets) on the super-resolved features and on the raw conv5 features.
    # Unlike a raw L2 on the residual it leaves null-space directions free,
    # so the generator can keep lifting small objects while large-object
    # predictions stay pinned to what the frozen head saw in phase 1.
    distill_weight: float = 1.0
    momentum: float = 0.9
    weight_decay: float = 5e-4
    phase1_iters: int = 500
    alternation_rounds: int = 300
    gen_steps_per_round: int = 1
    adv_steps_per_round: int = 1
    gen_fg: int = 32
    gen_bg: int = 96
    adv_images: int = 4
    adv_fg_per_image: int = 8
    weights: LossWeights = field(default_factory=LossWeights)
    seed: int = 0

    def validate(self):
        if not (0.0 <= self.momentum < 1.0):
            raise ValueError("momentum must lie in [0,1)")
        if self.adv_lr_scale <= 0.0:
            raise ValueError("adv_lr_scale must be > 0")
        if not (0.0 <= self.consolidate_frac <= 1.0):
            raise ValueError("consolidate_frac must lie in [0,1]")
        if self.zero_map_weight < 0.0:
            raise ValueError("zero_map_weight must be >= 0")
        if self.pretrain_noise < 0.0:
            raise ValueError("pretrain_noise must be >= 0")
        if self.distill_weight < 0.0:
            raise ValueError("distill_weight must be >= 0")
        # phase lengths may be 0 (empty schedule leaves the state untouched)
        if self.phase1_iters < 0 or self.alternation_rounds < 0:
            raise ValueError("phase lengths must be >= 0")
        for v in (self.gen_steps_per_round, self.adv_steps_per_round,
                  self.gen_fg, self.gen_bg, self.adv_images,
                  self.adv_fg_per_image):
            if v < 1:
                raise ValueError("per-step batch counts must be >= 1")
        self.weights.validate()


@dataclass(frozen=True)
class ModelConfig:
    channels: tuple = (8, 16, 24, 32, 48)
    num_classes: int = 3
    roi_out: tuple = (7, 7)
    gen_blocks: int = 6
    input_level: str = "conv1"
    hidden: tuple = (4096, 1024)

    @property
    def backbone(self):
        return BackboneConfig(channels=tuple(self.channels))

    @property
    def generator(self):
        level_idx = int(self.input_level[-1]) - 1
        return GeneratorConfig(num_blocks=self.gen_blocks,
                               conv5_channels=self.channels[-1],
                               input_channels=self.channels[level_idx],
                               input_level=self.input_level)

    @property
    def discriminator(self):
        oh, ow = self.roi_out
        return DiscriminatorConfig(in_dim=self.channels[-1] * oh * ow,
                                   num_classes=self.num_classes,
                                   hidden=tuple(self.hidden))


@dataclass
class ModelState:
    backbone: ParamSet
    generator: ParamSet
    adversarial: ParamSet
    perception: ParamSet
    velocities: dict
    counters: dict

    SETS = ("backbone", "generator", "adversarial", "perception")

    def param_sets(self):
        return {name: getattr(self, name) for name in self.SETS}

    def digests(self):
        return {name: ps.digest() for name, ps in self.param_sets().items()}


def init_state(mconfig: ModelConfig, seed) -> ModelState:
    sets = {
        "backbone": bb.init_backbone(mconfig.backbone,
                                     np.random.default_rng((seed, RNG_INIT, 0))),
        "generator": gen.init_generator(mconfig.generator,
                                        np.random.default_rng((seed, RNG_INIT, 1))),
        "adversarial": disc.init_adversarial(mconfig.discriminator,
                                             np.random.default_rng((seed, RNG_INIT, 2))),
        "perception": disc.init_perception(mconfig.discriminator,
                                           np.random.default_rng((seed, RNG_INIT, 3))),
    }
    velocities = {name: ps.zeros_like() for name, ps in sets.items()}
    counters = {"phase1_iter": 0, "round": 0, "global_iter": 0}
    return ModelState(velocities=velocities, counters=counters, **sets)


def save_state(path, state: ModelState):
    sets = dict(state.param_sets())
    vel = ParamSet()
    for set_name, vset in state.velocities.items():
        for name, arr in vset.items():
            vel[f"{set_name}/{name}"] = arr
    sets["vel"] = vel
    save_checkpoint(path, sets, counters=state.counters)


def load_state(path) -> ModelState:
    sets, counters = load_checkpoint(path)
    velocities = {name: ParamSet() for name in ModelState.SETS}
    for name, arr in sets.pop("vel", ParamSet()).items():
        set_name, _, param_name = name.partition("/")
        velocities[set_name][param_name] = arr
    counters = {"phase1_iter": int(counters.get("phase1_iter", 0)),
                "round": int(counters.get("round", 0)),
                "global_iter": int(counters.get("global_iter", 0))}
    return ModelState(velocities=velocities, counters=counters, **sets)


# ---------------------------------------------------------------------------
# logging


class TrainLog:
    def __init__(self):
        self.rows = []

    def add(self, iteration, phase, report: LossReport):
        self.rows.append((iteration, phase, report))

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(LOG_HEADER + "\n")
            for iteration, phase, rep in self.rows:
                vals = ",".join(repr(float(v)) for v in rep.row())
                fh.write(f"{iteration},{phase},{vals}\n")


def _finite(value, what):
    if not np.isfinite(value):
        raise TrainingDiverged(f"non-finite {what}: {value}")
    return value


# ---------------------------------------------------------------------------
# batch bookkeeping


def split_threshold(dataset):
    """Global mean instance area: the small/large subset boundary."""
    areas = [a.area for a in dataset.all_annotations()]
    if not areas:
        raise ValueError("dataset has no annotations")
    return sum(areas) / len(areas)


@dataclass
class ImageIndex:
    """Per-image proposal partition plus regression targets."""
    boxes: list
    labels: np.ndarray        # [P]
    targets: np.ndarray       # [P,4] float32, zeros for background
    fg: np.ndarray            # indices, any size
    small_fg: np.ndarray
    large_fg: np.ndarray
    bg: np.ndarray


def index_image(proposals, annotations, mean_area) -> ImageIndex:
    boxes, labels, targets = [], [], []
    fg, small_fg, large_fg, bg = [], [], [], []
    for i, p in enumerate(proposals):
        boxes.append(p.box)
        labels.append(p.label)
        if p.label != 0 and p.matched_gt is not None:
            ann = annotations[p.matched_gt]
            targets.append(losses.bbox_encode(p.box, ann.box))
            fg.append(i)
            (small_fg if ann.area < mean_area else large_fg).append(i)
        else:
            targets.append(np.zeros(4))
            bg.append(i)
    return ImageIndex(
        boxes=boxes, labels=np.asarray(labels, dtype=np.int64),
        targets=np.asarray(targets, dtype=np.float32),
        fg=np.asarray(fg, dtype=np.int64),
        small_fg=np.asarray(small_fg, dtype=np.int64),
        large_fg=np.asarray(large_fg, dtype=np.int64),
        bg=np.asarray(bg, dtype=np.int64))


def sample_pool(pool, n, rng):
    """Without replacement when the pool suffices, with replacement otherwise."""
    pool = np.asarray(pool)
    if pool.size == 0:
        raise ValueError("cannot sample from an empty proposal pool")
    replace = pool.size < n
    return rng.choice(pool, size=n, replace=replace)


def sample_generator_batch(dataset, image_id, seed, n_fg=32, n_bg=96):
    """n_fg foreground + n_bg background proposal indices for one image."""
    proposals = dataset.proposals.get(image_id, [])
    if not proposals:
        raise ValueError(f"image {image_id} has no proposals")
    fg = [i for i, p in enumerate(proposals) if p.label != 0]
    bg = [i for i, p in enumerate(proposals) if p.label == 0]
    rng = np.random.default_rng(seed)
    return np.concatenate([sample_pool(fg, n_fg, rng),
                           sample_pool(bg, n_bg, rng)])


# ---------------------------------------------------------------------------
# pooled-feature store (valid only while the backbone is frozen)


class FeatureStore:
    def __init__(self, dataset, backbone_params, mconfig: ModelConfig):
        self.dataset = dataset
        self.params = backbone_params
        self.mconfig = mconfig
        self.mean_area = split_threshold(dataset)
        self._cache = {}

    def image(self, image_id):
        """-> (ImageIndex, pooled conv5 [P,C5,oh,ow], pooled f [P,Cf,oh,ow])."""
        if image_id not in self._cache:
            idx = index_image(self.dataset.proposals[image_id],
                              self.dataset.annotations[image_id], self.mean_area)
            pyramid, _ = bb.forward(bb.prepare_image(self.dataset.images[image_id]),
                                    self.params)
            level = self.mconfig.input_level
            pooled5, _ = roi.pool_boxes(pyramid.levels["conv5"], idx.boxes,
                                        STRIDES["conv5"], self.mconfig.roi_out)
            pooledf, _ = roi.pool_boxes(pyramid.levels[level], idx.boxes,
                                        STRIDES[level], self.mconfig.roi_out)
            self._cache[image_id] = (idx, pooled5, pooledf)
        return self._cache[image_id]


# ---------------------------------------------------------------------------


def _lr(config: TrainConfig, idx, total):
    """Constant, with a 10x drop over the final third of the phase."""
    boundary = int(np.ceil(total * 2.0 / 3.0))
    return config.learning_rate * (0.1 if idx >= boundary else 1.0)


def _cls_reg_grads(probs, labels, reg, targets, num_classes):
    """Logit-space gradients of batch-mean (L_cls + L_loc)."""
    n = probs.shape[0]
    g_logits = probs.copy()
    g_logits[np.arange(n), labels] -= 1.0
    g_logits /= n
    g_reg = np.zeros(reg.shape, dtype=np.float64)
    for i in np.flatnonzero(labels >= 1):
        k = int(labels[i])
        sl = slice(4 * (k - 1), 4 * k)
        g_reg[i, sl] = losses.smooth_l1_grad(
            reg[i, sl].astype(np.float64) - targets[i]) / n
    return g_logits.astype(np.float32), g_reg.astype(np.float32)


class Trainer:
    def __init__(self, dataset, state: ModelState, mconfig: ModelConfig,
                 tconfig: TrainConfig, log: TrainLog = None):
        tconfig.validate()
        self.dataset = dataset
        self.state = state
        self.mconfig = mconfig
        self.tconfig = tconfig
        self.log = log if log is not None else TrainLog()
        self.mean_area = split_threshold(dataset)
        self._index = {}
        self._store = None

    # -- shared plumbing ----------------------------------------------------

    def image_index(self, image_id) -> ImageIndex:
        if image_id not in self._index:
            self._index[image_id] = index_image(
                self.dataset.proposals[image_id],
                self.dataset.annotations[image_id], self.mean_area)
        return self._index[image_id]

    @property
    def store(self) -> FeatureStore:
        """Pooled features against the frozen backbone (phases 2/3 only)."""
        if self._store is None:
            self._store = FeatureStore(self.dataset, self.state.backbone,
                                       self.mconfig)
        return self._store

    def _update(self, set_name, grads, lr):
        params = getattr(self.state, set_name)
        sgd_momentum_step(params, grads, self.state.velocities[set_name],
                          lr=lr, momentum=self.tconfig.momentum,
                          weight_decay=self.tconfig.weight_decay)

    def _log(self, phase, report):
        self.log.add(self.state.counters["global_iter"], phase, report)
        self.state.counters["global_iter"] += 1

    # -- phase 1 ------------------------------------------------------------

    def pretrain_images(self):
        """Images usable for phase 1: >=1 large-subset fg and >=1 bg proposal."""
        out = [i for i in self.dataset.image_ids
               if self.dataset.proposals.get(i)
               and self.image_index(i).large_fg.size
               and self.image_index(i).bg.size]
        if not out:
            raise ValueError("no image has both large-subset fg and bg proposals")
        return out

    def pretrain_step(self, it):
        cfg = self.tconfig
        rng = np.random.default_rng((cfg.seed, RNG_PRETRAIN, it))
        eligible = self.pretrain_images()
        image_id = eligible[int(rng.integers(len(eligible)))]
        idx = self.image_index(image_id)
        pick = np.concatenate([sample_pool(idx.large_fg, cfg.gen_fg, rng),
                               sample_pool(idx.bg, cfg.gen_bg, rng)])

        pyramid, caches = bb.forward(
            bb.prepare_image(self.dataset.images[image_id]),
            self.state.backbone, want_cache=True)
        boxes = [idx.boxes[i] for i in pick]
        pooled5, arg = roi.pool_boxes(pyramid.levels["conv5"], boxes,
                                      STRIDES["conv5"], self.mconfig.roi_out)
        if cfg.pretrain_noise:
            # |N(0,1)| has mean sqrt(2/pi); scale so E|noise| = pretrain_noise
            pooled5 = pooled5 + (cfg.pretrain_noise / np.sqrt(2.0 / np.pi)
                                 ) * rng.standard_normal(
                pooled5.shape).astype(pooled5.dtype)
        dcfg = self.mconfig.discriminator
        probs, _, reg, pcache = disc.perception_forward(
            pooled5, self.state.perception, dcfg, want_cache=True)
        labels = idx.labels[pick]
        targets = idx.targets[pick].astype(np.float64)
        l_cls, l_loc = losses.perception_loss_components(probs, labels, reg, targets)
        _finite(l_cls + l_loc, "pretrain loss")

        g_logits, g_reg = _cls_reg_grads(probs, labels, reg, targets,
                                         dcfg.num_classes)
        g_in, grads_per = disc.perception_backward(g_logits, g_reg, pcache)
        g_pooled = np.ascontiguousarray(g_in.reshape(pooled5.shape))
        g_map = roi.pool_backward(g_pooled, arg, pyramid.levels["conv5"].shape)
        grads_bb = bb.backward(g_map, caches)

        lr = _lr(cfg, it, cfg.phase1_iters)
        self._update("perception", grads_per, lr)
        self._update("backbone", grads_bb, lr)

        l_dis_p = l_cls + l_loc
        self._log("pretrain", LossReport(
            L_cls=l_cls, L_loc=l_loc, L_dis_p=l_dis_p,
            L_dis=losses.combine(0.0, l_dis_p, cfg.weights)))

    def pretrain_perception(self):
        """Phase 1: backbone + perception on the large-instance subset."""
        while self.state.counters["phase1_iter"] < self.tconfig.phase1_iters:
            self.pretrain_step(self.state.counters["phase1_iter"])
            self.state.counters["phase1_iter"] += 1
        self._store = None  # backbone now frozen; pooled features cacheable
        return self.state

    # -- phase 2: generator -------------------------------------------------

    def gen_images(self):
        out = [i for i in self.dataset.image_ids
               if self.dataset.proposals.get(i)
               and self.image_index(i).fg.size and self.image_index(i).bg.size]
        if not out:
            raise ValueError("no image has both fg and bg proposals")
        return out

    def generator_step(self, step, image_id=None):
        """One Theta_g update on a 32 fg + 96 bg batch from one image."""
        cfg = self.tconfig
        w = cfg.weights
        rng = np.random.default_rng((cfg.seed, RNG_GEN, step))
        if image_id is None:
            eligible = self.gen_images()
            image_id = eligible[int(rng.integers(len(eligible)))]
        idx, pooled5, pooledf = self.store.image(image_id)
        pick = np.concatenate([sample_pool(idx.fg, cfg.gen_fg, rng),
                               sample_pool(idx.bg, cfg.gen_bg, rng)])
        n_fg = cfg.gen_fg

        gcfg = self.mconfig.generator
        dcfg = self.mconfig.discriminator
        f_in = np.ascontiguousarray(pooledf[pick])
        boundary = int(np.ceil(cfg.alternation_rounds * cfg.consolidate_frac))
        consolidating = (step // cfg.gen_steps_per_round) >= boundary
        residual, gcache = gen.forward(f_in, self.state.generator, gcfg,
                                       train=not consolidating)
        super_feat = pooled5[pick] + residual

        # The adversarial game is asymmetric: only generated *small*-subset
        # features should be pushed toward the large-feature manifold. Large
        # foreground rows stay in the batch for the perception terms and the
        # zero-map penalty, which anchor the generator to a near-zero
        # residual on them.
        small_rows = np.flatnonzero(np.isin(pick[:n_fg], idx.small_fg))
        large_rows = np.flatnonzero(np.isin(pick[:n_fg], idx.large_fg))
        if small_rows.size:
            d_gen, _, adv_cache = disc.adversarial_forward(
                np.ascontiguousarray(super_feat[small_rows]),
                self.state.adversarial, dcfg, want_cache=True)
            l_dis_a = losses.adversarial_loss_G(d_gen)
        else:
            d_gen, adv_cache, l_dis_a = None, None, 0.0

        probs, logits, reg, pcache = disc.perception_forward(
            super_feat, self.state.perception, dcfg, want_cache=True)
        labels = idx.labels[pick]
        targets = idx.targets[pick].astype(np.float64)
        l_cls, l_loc = losses.perception_loss_components(probs, labels, reg, targets)
        l_dis_p = l_cls + l_loc
        l_dis = losses.combine(l_dis_a, l_dis_p, w)
        _finite(l_dis, "generator loss")

        # d(-log D)/dlogit = sigmoid - 1, averaged over the generated rows
        g_super = np.zeros_like(super_feat)
        if w.w1 != 0.0 and small_rows.size:
            g_adv_logit = (w.w1 * (d_gen - 1.0) / small_rows.size).astype(np.float32)
            g_fg, _ = disc.adversarial_backward(g_adv_logit, adv_cache)
            g_super[small_rows] += g_fg.reshape(small_rows.size,
                                                *super_feat.shape[1:])
        g_logits_total = np.zeros(logits.shape, dtype=np.float32)
        g_reg_total = np.zeros(reg.shape, dtype=np.float32)
        if w.w2 != 0.0:
            g_logits, g_reg = _cls_reg_grads(probs, labels, reg, targets,
                                             dcfg.num_classes)
            g_logits_total += w.w2 * g_logits
            g_reg_total += w.w2 * g_reg
        if cfg.distill_weight and large_rows.size:
            # functional-identity anchor: MSE to the frozen head's outputs
            # on the raw features of the same large rows
            _, logits_r, reg_r, _ = disc.perception_forward(
                np.ascontiguousarray(pooled5[pick][large_rows]),
                self.state.perception, dcfg)
            d_logit = (logits[large_rows] - logits_r).astype(np.float64)
            d_reg = (reg[large_rows] - reg_r).astype(np.float64)
            g_logits_total[large_rows] += (
                2.0 * cfg.distill_weight / d_logit.size * d_logit
            ).astype(np.float32)
            g_reg_total[large_rows] += (
                2.0 * cfg.distill_weight / d_reg.size * d_reg
            ).astype(np.float32)
        if g_logits_total.any() or g_reg_total.any():
            g_in, _ = disc.perception_backward(g_logits_total, g_reg_total,
                                               pcache)
            g_super += g_in.reshape(super_feat.shape)
        # zero-map penalty: d/d(res) of zw * mean(res[large]^2); super_feat
        # and residual share the gradient (super = F_s + res), so fold it in
        if consolidating and cfg.zero_map_weight and large_rows.size:
            scale = 2.0 * cfg.zero_map_weight / residual[large_rows].size
            g_super[large_rows] += (scale * residual[large_rows]).astype(
                g_super.dtype)

        _, grads_gen = gen.backward(g_super, gcache, gcfg)
        lr = _lr(cfg, step // cfg.gen_steps_per_round, cfg.alternation_rounds)
        self._update("generator", grads_gen, lr)
        self._log("gen", LossReport(L_dis_a=l_dis_a, L_cls=l_cls, L_loc=l_loc,
                                    L_dis_p=l_dis_p, L_dis=l_dis))

    # -- phase 3: adversarial branch -----------------------------------------

    def adv_images(self):
        out = [i for i in self.dataset.image_ids
               if self.dataset.proposals.get(i)
               and self.image_index(i).small_fg.size
               and self.image_index(i).large_fg.size]
        if not out:
            raise ValueError("no image has both small-subset and large-subset fg")
        return out

    def adversarial_step(self, step):
        """One Theta_a update on paired large-fg (real) and small-fg batches."""
        cfg = self.tconfig
        rng = np.random.default_rng((cfg.seed, RNG_ADV, step))
        eligible = self.adv_images()
        take = min(cfg.adv_images, len(eligible))
        image_ids = rng.choice(np.asarray(eligible), size=take, replace=False)

        large_feats, small5, smallf, small_labels, small_targets = [], [], [], [], []
        for image_id in image_ids:
            idx, pooled5, pooledf = self.store.image(int(image_id))
            lg = sample_pool(idx.large_fg, cfg.adv_fg_per_image, rng)
            sm = sample_pool(idx.small_fg, cfg.adv_fg_per_image, rng)
            large_feats.append(pooled5[lg])
            small5.append(pooled5[sm])
            smallf.append(pooledf[sm])
            small_labels.append(idx.labels[sm])
            small_targets.append(idx.targets[sm])
        f_l = np.ascontiguousarray(np.concatenate(large_feats))
        s5 = np.ascontiguousarray(np.concatenate(small5))
        sf = np.ascontiguousarray(np.concatenate(smallf))
        labels = np.concatenate(small_labels)
        targets = np.concatenate(small_targets).astype(np.float64)

        gcfg = self.mconfig.generator
        dcfg = self.mconfig.discriminator
        # frozen generator, eval mode: running moments, no state mutation
        residual, _ = gen.forward(sf, self.state.generator, gcfg, train=False)
        s_super = s5 + residual

        d_large, _, cache_l = disc.adversarial_forward(
            f_l, self.state.adversarial, dcfg, want_cache=True)
        d_gen, _, cache_g = disc.adversarial_forward(
            s_super, self.state.adversarial, dcfg, want_cache=True)
        l_a = losses.adversarial_loss_D(d_large, d_gen)
        _finite(l_a, "adversarial loss")

        g_logit_l = ((d_large - 1.0) / d_large.size).astype(np.float32)
        g_logit_g = (d_gen / d_gen.size).astype(np.float32)
        _, grads_l = disc.adversarial_backward(g_logit_l, cache_l)
        _, grads_g = disc.adversarial_backward(g_logit_g, cache_g)
        grads = ParamSet()
        for name in grads_l.names():
            grads[name] = grads_l[name] + grads_g[name]

        lr = cfg.adv_lr_scale * _lr(cfg, step // cfg.adv_steps_per_round,
                                    cfg.alternation_rounds)
        self._update("adversarial", grads, lr)

        # diagnostics: generator-side losses on the same generated batch
        l_dis_a = losses.adversarial_loss_G(d_gen)
        probs, _, reg, _ = disc.perception_forward(
            s_super, self.state.perception, dcfg)
        l_cls, l_loc = losses.perception_loss_components(probs, labels, reg,
                                                         targets)
        l_dis_p = l_cls + l_loc
        self._log("adv", LossReport(
            L_a=l_a, L_dis_a=l_dis_a, L_cls=l_cls, L_loc=l_loc,
            L_dis_p=l_dis_p, L_dis=losses.combine(l_dis_a, l_dis_p, cfg.weights)))

    # -- alternation ---------------------------------------------------------

    def alternate(self):
        cfg = self.tconfig
        while self.state.counters["round"] < cfg.alternation_rounds:
            r = self.state.counters["round"]
            for j in range(cfg.gen_steps_per_round):
                self.generator_step(r * cfg.gen_steps_per_round + j)
            for j in range(cfg.adv_steps_per_round):
                self.adversarial_step(r * cfg.adv_steps_per_round + j)
            self.state.counters["round"] = r + 1
        return self.state
