"""Two-branch discriminator over pooled conv5-shaped features.

Both branches are independent fully-connected stacks on the flattened
feature: the adversarial branch ends in a single sigmoid unit, the perception
branch in sibling classification (K+1 logits) and regression (4K) heads.
No parameters are shared, so Theta_a and Theta_p stay disjoint.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .params import ParamSet, linear_init


@dataclass(frozen=True)
class DiscriminatorConfig:
    in_dim: int  # C5 * roi_h * roi_w
    num_classes: int = 3
    hidden: tuple = (4096, 1024)

    def validate(self):
        if self.in_dim < 1 or self.num_classes < 1:
            raise ValueError("in_dim and num_classes must be >= 1")
        if len(self.hidden) != 2:
            raise ValueError("exactly two hidden widths expected")


def _flatten(features):
    x = features.values if hasattr(features, "values") else features
    x = np.asarray(x)
    if x.ndim == 3:
        x = x[None]
    return np.ascontiguousarray(x.reshape(x.shape[0], -1))


def _check_dim(x, config):
    if x.shape[1] != config.in_dim:
        raise ValueError(f"flattened dim {x.shape[1]} != configured {config.in_dim}")


# ---------------------------------------------------------------------------
# adversarial branch: in -> h1 -> h2 -> 1 -> sigmoid


def init_adversarial(config: DiscriminatorConfig, rng) -> ParamSet:
    config.validate()
    h1, h2 = config.hidden
    params = ParamSet()
    for name, din, dout in (("fc1", config.in_dim, h1), ("fc2", h1, h2),
                            ("out", h2, 1)):
        w, b = linear_init(rng, din, dout)
        params[f"adv/{name}/w"], params[f"adv/{name}/b"] = w, b
    return params


def adversarial_forward(features, params: ParamSet, config: DiscriminatorConfig,
                        want_cache=False):
    """-> (probs [N] in (0,1), logits [N], cache)."""
    x = _flatten(features)
    _check_dim(x, config)
    h, c1 = ops.linear(x, params["adv/fc1/w"], params["adv/fc1/b"])
    h, m1 = ops.relu(h)
    h, c2 = ops.linear(h, params["adv/fc2/w"], params["adv/fc2/b"])
    h, m2 = ops.relu(h)
    z, c3 = ops.linear(h, params["adv/out/w"], params["adv/out/b"])
    logits = z[:, 0]
    probs = ops.sigmoid(logits.astype(np.float64))
    cache = (c1, m1, c2, m2, c3) if want_cache else None
    return probs, logits, cache


def adversarial_backward(g_logits, cache):
    """[N] logit gradients -> (g_input [N,in_dim], param grads)."""
    c1, m1, c2, m2, c3 = cache
    grads = ParamSet()
    g = np.ascontiguousarray(g_logits[:, None])
    g, gw, gb = ops.linear_backward(g, c3)
    grads["adv/out/w"], grads["adv/out/b"] = gw, gb
    g = ops.relu_backward(g, m2)
    g, gw, gb = ops.linear_backward(g, c2)
    grads["adv/fc2/w"], grads["adv/fc2/b"] = gw, gb
    g = ops.relu_backward(g, m1)
    g, gw, gb = ops.linear_backward(g, c1)
    grads["adv/fc1/w"], grads["adv/fc1/b"] = gw, gb
    return g, grads


# ---------------------------------------------------------------------------
# perception branch: in -> h1 -> h2 -> {K+1 logits, 4K offsets}


def init_perception(config: DiscriminatorConfig, rng) -> ParamSet:
    config.validate()
    h1, h2 = config.hidden
    k = config.num_classes
    params = ParamSet()
    for name, din, dout in (("fc1", config.in_dim, h1), ("fc2", h1, h2),
                            ("cls", h2, k + 1), ("reg", h2, 4 * k)):
        w, b = linear_init(rng, din, dout)
        params[f"per/{name}/w"], params[f"per/{name}/b"] = w, b
    return params


def perception_forward(features, params: ParamSet, config: DiscriminatorConfig,
                       want_cache=False):
    """-> (class_probs [N,K+1], cls_logits, offsets [N,4K], cache)."""
    x = _flatten(features)
    _check_dim(x, config)
    h, c1 = ops.linear(x, params["per/fc1/w"], params["per/fc1/b"])
    h, m1 = ops.relu(h)
    h, c2 = ops.linear(h, params["per/fc2/w"], params["per/fc2/b"])
    h, m2 = ops.relu(h)
    logits, c3 = ops.linear(h, params["per/cls/w"], params["per/cls/b"])
    reg, c4 = ops.linear(h, params["per/reg/w"], params["per/reg/b"])
    probs = ops.softmax(logits.astype(np.float64))
    cache = (c1, m1, c2, m2, c3, c4) if want_cache else None
    return probs, logits, reg, cache


def perception_backward(g_logits, g_reg, cache):
    """Head gradients -> (g_input, param grads)."""
    c1, m1, c2, m2, c3, c4 = cache
    grads = ParamSet()
    gh_cls, gw, gb = ops.linear_backward(np.ascontiguousarray(g_logits), c3)
    grads["per/cls/w"], grads["per/cls/b"] = gw, gb
    gh_reg, gw, gb = ops.linear_backward(np.ascontiguousarray(g_reg), c4)
    grads["per/reg/w"], grads["per/reg/b"] = gw, gb
    g = ops.relu_backward(gh_cls + gh_reg, m2)
    g, gw, gb = ops.linear_backward(g, c2)
    grads["per/fc2/w"], grads["per/fc2/b"] = gw, gb
    g = ops.relu_backward(g, m1)
    g, gw, gb = ops.linear_backward(g, c1)
    grads["per/fc1/w"], grads["per/fc1/b"] = gw, gb
    return g, grads
