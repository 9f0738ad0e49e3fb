"""Differentiable layer primitives (forward + hand-written backward).

Every forward returns (output, cache); the matching backward consumes the
upstream gradient and the cache. All functions preserve the input dtype so
the same code path serves float32 training and float64 gradient checking.
"""

import numpy as np

from . import kernels as K


def conv2d(x, w, b, stride=1, pad=1):
    x = np.ascontiguousarray(x)
    w = np.ascontiguousarray(w)
    y = K.conv2d_fwd(x, w, stride, pad)
    y += b[None, :, None, None]
    return y, (x, w, stride, pad)


def conv2d_backward(gy, cache):
    x, w, stride, pad = cache
    gy = np.ascontiguousarray(gy)
    gx = K.conv2d_bwd_input(gy, w, stride, pad, x.shape[2], x.shape[3])
    gw = K.conv2d_bwd_weight(x, gy, stride, pad, w.shape[2], w.shape[3])
    gb = gy.sum(axis=(0, 2, 3))
    return gx, gw, gb


def relu(x):
    mask = x > 0
    return x * mask, mask


def relu_backward(gy, mask):
    return gy * mask


def linear(x, w, b):
    return x @ w + b, (x, w)


def linear_backward(gy, cache):
    x, w = cache
    return gy @ w.T, x.T @ gy, gy.sum(axis=0)


def sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    return ez / ez.sum(axis=-1, keepdims=True)


def batchnorm2d(x, gamma, beta, rmean, rvar, train, momentum=0.9, eps=1e-5):
    """Per-channel batch norm over (N, H, W).

    In train mode the batch statistics normalize and the running moments are
    updated in place (rm <- momentum*rm + (1-momentum)*batch); eval mode
    normalizes with the running moments. Running variance stores the biased
    (1/N) batch variance.
    """
    if train:
        mean = x.mean(axis=(0, 2, 3))
        var = x.var(axis=(0, 2, 3))
        rmean *= momentum
        rmean += (1.0 - momentum) * mean.astype(rmean.dtype)
        rvar *= momentum
        rvar += (1.0 - momentum) * var.astype(rvar.dtype)
    else:
        mean = rmean.astype(x.dtype)
        var = rvar.astype(x.dtype)
    inv_std = 1.0 / np.sqrt(var + eps)
    xhat = (x - mean[None, :, None, None]) * inv_std[None, :, None, None]
    y = gamma[None, :, None, None] * xhat + beta[None, :, None, None]
    return y, (xhat, gamma, inv_std, train)


def batchnorm2d_backward(gy, cache):
    xhat, gamma, inv_std, train = cache
    ggamma = (gy * xhat).sum(axis=(0, 2, 3))
    gbeta = gy.sum(axis=(0, 2, 3))
    gxhat = gy * gamma[None, :, None, None]
    if not train:
        return gxhat * inv_std[None, :, None, None], ggamma, gbeta
    mean_g = gxhat.mean(axis=(0, 2, 3))[None, :, None, None]
    mean_gx = (gxhat * xhat).mean(axis=(0, 2, 3))[None, :, None, None]
    gx = inv_std[None, :, None, None] * (gxhat - mean_g - xhat * mean_gx)
    return gx, ggamma, gbeta
