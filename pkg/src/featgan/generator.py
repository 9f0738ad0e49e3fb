"""Conditional residual generator.

Adapter (3x3 conv -> ReLU -> 1x1 conv) lifts the pooled low-level feature f
to the conv5 channel count, then B feed-forward blocks of
[3x3 conv -> batchnorm -> ReLU -> 3x3 conv] refine it. The second conv of a
block is deliberately bare: zeroing the final block's second conv makes the
residual identically zero no matter what the batch-norm state is, and because
a conv at zero weight still passes gradient to those weights, training can
move off the identity. (Ending the block in BN->ReLU instead would pin the
zero-initialized path at exactly 0, where the ReLU derivative vanishes and no
parameter could ever receive gradient.)

The last block's second conv is zero-initialized, so the network starts as an
exact zero map and super_resolve starts as the identity.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .params import ParamSet, conv_init

BN_MOMENTUM = 0.9
BN_EPS = 1e-5


@dataclass(frozen=True)
class GeneratorConfig:
    num_blocks: int = 6
    conv5_channels: int = 48
    input_channels: int = 8
    input_level: str = "conv1"

    def validate(self):
        if self.num_blocks < 1:
            raise ValueError("num_blocks must be >= 1")
        if self.input_level not in ("conv1", "conv2", "conv3", "conv4", "conv5"):
            raise ValueError(f"unknown input level {self.input_level!r}")


def init_generator(config: GeneratorConfig, rng) -> ParamSet:
    config.validate()
    c5 = config.conv5_channels
    params = ParamSet()
    w, b = conv_init(rng, c5, config.input_channels, 3, 3)
    params["gen/adapt3/w"], params["gen/adapt3/b"] = w, b
    w, b = conv_init(rng, c5, c5, 1, 1)
    params["gen/adapt1/w"], params["gen/adapt1/b"] = w, b
    for i in range(config.num_blocks):
        last = i == config.num_blocks - 1
        w, b = conv_init(rng, c5, c5, 3, 3)
        params[f"gen/blk{i}/c1/w"], params[f"gen/blk{i}/c1/b"] = w, b
        w, b = conv_init(rng, c5, c5, 3, 3)
        if last:  # identity start: the whole residual path opens at zero
            w = np.zeros_like(w)
        params[f"gen/blk{i}/c2/w"], params[f"gen/blk{i}/c2/b"] = w, b
        params[f"gen/blk{i}/bn/gamma"] = np.ones(c5, dtype=np.float32)
        params[f"gen/blk{i}/bn/beta"] = np.zeros(c5, dtype=np.float32)
        params[f"gen/blk{i}/bn/rmean"] = np.zeros(c5, dtype=np.float32)
        params[f"gen/blk{i}/bn/rvar"] = np.ones(c5, dtype=np.float32)
    return params


def zero_output_path(params: ParamSet, num_blocks):
    """Zero the final block's second conv (kernel and bias) in place."""
    i = num_blocks - 1
    params[f"gen/blk{i}/c2/w"][...] = 0
    params[f"gen/blk{i}/c2/b"][...] = 0


def forward(f_pooled, params: ParamSet, config: GeneratorConfig, train):
    """[N,Cin,h,w] pooled low-level features -> ([N,C5,h,w] residual, cache).

    Train mode drives batch norm off batch statistics and updates the running
    moments stored in `params` in place; eval mode reads the stored moments.
    """
    if f_pooled.ndim != 4 or f_pooled.shape[1] != config.input_channels:
        raise ValueError(
            f"expected [N,{config.input_channels},h,w] input, got {f_pooled.shape}")
    caches = []
    h, cache = ops.conv2d(f_pooled, params["gen/adapt3/w"], params["gen/adapt3/b"],
                          stride=1, pad=1)
    h, mask = ops.relu(h)
    caches.append(("adapt3", cache, mask))
    h, cache = ops.conv2d(h, params["gen/adapt1/w"], params["gen/adapt1/b"],
                          stride=1, pad=0)
    caches.append(("adapt1", cache, None))
    for i in range(config.num_blocks):
        h, c1 = ops.conv2d(h, params[f"gen/blk{i}/c1/w"], params[f"gen/blk{i}/c1/b"],
                           stride=1, pad=1)
        h, bnc = ops.batchnorm2d(h, params[f"gen/blk{i}/bn/gamma"],
                                 params[f"gen/blk{i}/bn/beta"],
                                 params[f"gen/blk{i}/bn/rmean"],
                                 params[f"gen/blk{i}/bn/rvar"],
                                 train=train, momentum=BN_MOMENTUM, eps=BN_EPS)
        h, mask = ops.relu(h)
        h, c2 = ops.conv2d(h, params[f"gen/blk{i}/c2/w"], params[f"gen/blk{i}/c2/b"],
                           stride=1, pad=1)
        caches.append((f"blk{i}", c1, bnc, mask, c2))
    return h, caches


def backward(g_residual, caches, config: GeneratorConfig):
    """Gradient of a scalar w.r.t. the residual -> (g_input, param grads)."""
    grads = ParamSet()
    g = g_residual
    for i in reversed(range(config.num_blocks)):
        _, c1, bnc, mask, c2 = caches[2 + i]
        g, gw, gb = ops.conv2d_backward(g, c2)
        grads[f"gen/blk{i}/c2/w"], grads[f"gen/blk{i}/c2/b"] = gw, gb
        g = ops.relu_backward(g, mask)
        g, ggamma, gbeta = ops.batchnorm2d_backward(g, bnc)
        grads[f"gen/blk{i}/bn/gamma"] = ggamma
        grads[f"gen/blk{i}/bn/beta"] = gbeta
        g, gw, gb = ops.conv2d_backward(g, c1)
        grads[f"gen/blk{i}/c1/w"], grads[f"gen/blk{i}/c1/b"] = gw, gb
    _, cache, _ = caches[1]
    g, gw, gb = ops.conv2d_backward(g, cache)
    grads["gen/adapt1/w"], grads["gen/adapt1/b"] = gw, gb
    _, cache, mask = caches[0]
    g = ops.relu_backward(g, mask)
    g, gw, gb = ops.conv2d_backward(g, cache)
    grads["gen/adapt3/w"], grads["gen/adapt3/b"] = gw, gb
    return g, grads


def generator_residual(f_pooled, params, config, mode="eval"):
    """Single-feature convenience wrapper ([Cin,h,w] in, [C5,h,w] out)."""
    if mode not in ("train", "eval"):
        raise ValueError("mode must be 'train' or 'eval'")
    values = f_pooled.values if hasattr(f_pooled, "values") else f_pooled
    out, _ = forward(np.ascontiguousarray(values[None]), params, config,
                     train=(mode == "train"))
    return out[0]


def super_resolve(conv5_pooled, residual):
    """Element-wise sum F_s + G(F_s|f); shapes must match exactly."""
    a = conv5_pooled.values if hasattr(conv5_pooled, "values") else conv5_pooled
    if a.shape != residual.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {residual.shape}")
    return a + residual
