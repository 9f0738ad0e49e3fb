"""Tiny five-stage convolutional backbone exposing a conv1..conv5 pyramid.

One 3x3 convolution + ReLU per stage; stages 2-5 downsample with stride 2, so
level strides are {conv1:1, conv2:2, conv3:4, conv4:8, conv5:16} and every
level satisfies H_l == ceil(H / stride_l) under pad-1 arithmetic.
"""

from dataclasses import dataclass

import numpy as np

from . import ops
from .params import ParamSet, conv_init

LEVELS = ("conv1", "conv2", "conv3", "conv4", "conv5")
STRIDES = {"conv1": 1, "conv2": 2, "conv3": 4, "conv4": 8, "conv5": 16}


@dataclass(frozen=True)
class BackboneConfig:
    channels: tuple = (8, 16, 24, 32, 48)
    in_channels: int = 1

    def validate(self):
        if len(self.channels) != 5:
            raise ValueError("backbone needs exactly 5 stage widths")
        if any(c < 1 for c in self.channels):
            raise ValueError("stage widths must be >= 1")


@dataclass
class FeaturePyramid:
    levels: dict  # name -> [C,H,W]
    strides: dict = None

    def __post_init__(self):
        if self.strides is None:
            self.strides = dict(STRIDES)


def init_backbone(config: BackboneConfig, rng) -> ParamSet:
    config.validate()
    params = ParamSet()
    cin = config.in_channels
    for name, cout in zip(LEVELS, config.channels):
        w, b = conv_init(rng, cout, cin, 3, 3)
        params[f"bb/{name}/w"] = w
        params[f"bb/{name}/b"] = b
        cin = cout
    return params


def prepare_image(image):
    """uint8 [H,W] grayscale -> float32 [1,1,H,W] centered on 0."""
    x = np.asarray(image, dtype=np.float32) / 255.0 - 0.5
    if x.ndim != 2:
        raise ValueError("expected a single-channel [H,W] image")
    return x[None, None]


def forward(x, params: ParamSet, want_cache=False):
    """[1,Cin,H,W] float input -> (FeaturePyramid, cache)."""
    if x.shape[2] < STRIDES["conv5"] or x.shape[3] < STRIDES["conv5"]:
        raise ValueError("image smaller than the conv5 stride")
    levels = {}
    caches = []
    h = x
    for i, name in enumerate(LEVELS):
        stride = 1 if i == 0 else 2
        y, ccache = ops.conv2d(h, params[f"bb/{name}/w"], params[f"bb/{name}/b"],
                               stride=stride, pad=1)
        h, mask = ops.relu(y)
        caches.append((ccache, mask))
        levels[name] = h[0]
    pyramid = FeaturePyramid(levels=levels)
    return (pyramid, caches) if want_cache else (pyramid, None)


def extract_features(image, params: ParamSet) -> FeaturePyramid:
    pyramid, _ = forward(prepare_image(image), params)
    return pyramid


def backward(g_conv5, caches) -> ParamSet:
    """Backprop a [C5,H5,W5] gradient on the conv5 map into parameter grads."""
    grads = ParamSet()
    g = np.ascontiguousarray(g_conv5[None])
    for i in reversed(range(len(LEVELS))):
        ccache, mask = caches[i]
        g = ops.relu_backward(g, mask)
        g, gw, gb = ops.conv2d_backward(g, ccache)
        grads[f"bb/{LEVELS[i]}/w"] = gw
        grads[f"bb/{LEVELS[i]}/b"] = gb
    return grads
