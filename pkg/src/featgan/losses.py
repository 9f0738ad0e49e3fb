"""Loss functions and the box encoding they act on.

All probability inputs are clamped to [EPS, 1-EPS] before any logarithm so
losses and their gradients stay finite; natural log throughout. Batch inputs
are averaged so the learning rate is independent of batch size. Values are
accumulated in float64 regardless of input dtype — float32 cannot represent
1 - 1e-7 and would send log(1-d) to -inf.
"""

from dataclasses import dataclass

import numpy as np

EPS = 1e-7


def _clamp(p):
    return np.clip(np.asarray(p, dtype=np.float64), EPS, 1.0 - EPS)


@dataclass(frozen=True)
class LossWeights:
    w1: float = 1.0
    w2: float = 1.0

    def validate(self):
        if self.w1 < 0 or self.w2 < 0:
            raise ValueError("loss weights must be >= 0")


@dataclass
class LossReport:
    L_a: float = 0.0
    L_dis_a: float = 0.0
    L_cls: float = 0.0
    L_loc: float = 0.0
    L_dis_p: float = 0.0
    L_dis: float = 0.0

    FIELDS = ("L_a", "L_dis_a", "L_cls", "L_loc", "L_dis_p", "L_dis")

    def row(self):
        return [getattr(self, f) for f in self.FIELDS]


# ---------------------------------------------------------------------------
# adversarial objectives


def adversarial_loss_D(d_large, d_gen):
    """-log D(F_l) - log(1 - D(G(F_s))), each term batch-averaged."""
    dl, dg = _clamp(d_large), _clamp(d_gen)
    return float(np.mean(-np.log(dl)) + np.mean(-np.log(1.0 - dg)))


def adversarial_loss_D_grad(d_large, d_gen):
    dl, dg = _clamp(d_large), _clamp(d_gen)
    return -1.0 / (dl * dl.size), 1.0 / ((1.0 - dg) * dg.size)


def adversarial_loss_G(d_gen):
    """-log D(G(F_s)), batch-averaged."""
    dg = _clamp(d_gen)
    return float(np.mean(-np.log(dg)))


def adversarial_loss_G_grad(d_gen):
    dg = _clamp(d_gen)
    return -1.0 / (dg * dg.size)


# ---------------------------------------------------------------------------
# box regression


def smooth_l1(x):
    x = np.asarray(x, dtype=np.float64)
    ax = np.abs(x)
    out = np.where(ax < 1.0, 0.5 * x * x, ax - 0.5)
    return float(out) if out.ndim == 0 else out


def smooth_l1_grad(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.clip(x, -1.0, 1.0)
    return float(out) if out.ndim == 0 else out


def _center_form(box):
    x1, y1, x2, y2 = (float(v) for v in box)
    w, h = x2 - x1, y2 - y1
    if w <= 0 or h <= 0:
        raise ValueError(f"degenerate box {box!r}")
    return (x1 + x2) / 2.0, (y1 + y2) / 2.0, w, h


def bbox_encode(p_box, g_box):
    """Scale-invariant translation plus log-space size shift of G w.r.t. P."""
    px, py, pw, ph = _center_form(p_box)
    gx, gy, gw, gh = _center_form(g_box)
    return np.array([(gx - px) / pw, (gy - py) / ph,
                     np.log(gw / pw), np.log(gh / ph)], dtype=np.float64)


def bbox_decode(p_box, offsets):
    px, py, pw, ph = _center_form(p_box)
    rx, ry, rw, rh = (float(v) for v in offsets)
    gx, gy = px + rx * pw, py + ry * ph
    gw, gh = pw * np.exp(rw), ph * np.exp(rh)
    return (gx - gw / 2.0, gy - gh / 2.0, gx + gw / 2.0, gy + gh / 2.0)


# ---------------------------------------------------------------------------
# perception (detection multi-task) objective


def perceptual_loss(p, g, r_g=None, r_star=None):
    """-log p_g plus, for foreground, the smooth-L1 offset error sum."""
    p = _clamp(p)
    g = int(g)
    loss = -np.log(p[g])
    if g >= 1:
        diff = np.asarray(r_g, dtype=np.float64) - np.asarray(r_star, dtype=np.float64)
        loss = loss + np.sum(smooth_l1(diff))
    return float(loss)


def perceptual_loss_grad(p, g, r_g=None, r_star=None):
    """Gradients w.r.t. (p, r_g); zero offset gradient for background."""
    p = _clamp(p)
    g = int(g)
    gp = np.zeros_like(p)
    gp[g] = -1.0 / p[g]
    gr = np.zeros(4, dtype=np.float64)
    if g >= 1:
        diff = np.asarray(r_g, dtype=np.float64) - np.asarray(r_star, dtype=np.float64)
        gr = smooth_l1_grad(diff)
    return gp, gr


def perception_loss_components(probs, labels, reg, targets):
    """Batch-mean (L_cls, L_loc) for [N,K+1] probs and per-class offsets.

    `reg` is [N,4K] raw regression output; for each foreground row the class-g
    slice (columns 4(g-1):4g) is compared against `targets`; background rows
    contribute 0 to L_loc but still divide it, so l_cls + l_loc is the
    batch-mean of the per-proposal classification+localization sums.
    """
    probs = _clamp(probs)
    n = probs.shape[0]
    labels = np.asarray(labels, dtype=np.int64)
    l_cls = float(np.mean(-np.log(probs[np.arange(n), labels])))
    l_loc = 0.0
    fg = np.flatnonzero(labels >= 1)
    for i in fg:
        k = labels[i]
        sl = np.asarray(reg[i, 4 * (k - 1):4 * k], dtype=np.float64)
        l_loc += float(np.sum(smooth_l1(sl - np.asarray(targets[i], dtype=np.float64))))
    return l_cls, l_loc / n


def combine(l_dis_a, l_dis_p, weights: LossWeights = LossWeights()):
    """L_dis = w1 * L_dis_a + w2 * L_dis_p."""
    return float(weights.w1 * l_dis_a + weights.w2 * l_dis_p)
