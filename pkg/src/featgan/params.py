"""Named parameter collections, initialization, and the SGD update rule."""

import hashlib

import numpy as np


class ParamSet:
    """A named collection of learnable arrays.

    Thin ordered mapping from parameter name to ndarray. Names use a
    path-like convention ("block0/conv1/w"); weight decay applies only to
    names ending in "/w" (biases and batch-norm affine/moment arrays are
    exempt).
    """

    def __init__(self, arrays=None):
        self._arrays = dict(arrays) if arrays else {}

    def __getitem__(self, name):
        return self._arrays[name]

    def __setitem__(self, name, value):
        self._arrays[name] = value

    def __contains__(self, name):
        return name in self._arrays

    def __len__(self):
        return len(self._arrays)

    def names(self):
        return sorted(self._arrays)

    def items(self):
        return [(k, self._arrays[k]) for k in self.names()]

    def copy(self):
        return ParamSet({k: v.copy() for k, v in self._arrays.items()})

    def astype(self, dtype):
        return ParamSet({k: v.astype(dtype) for k, v in self._arrays.items()})

    def zeros_like(self):
        return ParamSet({k: np.zeros_like(v) for k, v in self._arrays.items()})

    def num_values(self):
        return sum(v.size for v in self._arrays.values())

    def digest(self):
        """Content hash over names, shapes, dtypes and raw bytes."""
        h = hashlib.sha256()
        for name in self.names():
            arr = self._arrays[name]
            h.update(name.encode())
            h.update(str(arr.shape).encode())
            h.update(str(arr.dtype).encode())
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


def xavier_uniform(rng, shape, fan_in, fan_out, dtype=np.float32):
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def conv_init(rng, cout, cin, kh, kw, dtype=np.float32):
    w = xavier_uniform(rng, (cout, cin, kh, kw), cin * kh * kw, cout * kh * kw, dtype)
    b = np.zeros(cout, dtype=dtype)
    return w, b


def linear_init(rng, din, dout, dtype=np.float32):
    w = xavier_uniform(rng, (din, dout), din, dout, dtype)
    b = np.zeros(dout, dtype=dtype)
    return w, b


def decays(name):
    return name.endswith("/w")


def sgd_momentum_step(params, grads, velocity, lr, momentum, weight_decay):
    """In-place SGD with momentum: v <- mu*v - lr*(g + wd*theta); theta += v.

    Weight decay is applied only to "/w"-suffixed arrays. `grads` may omit
    names (treated as zero gradient; those arrays still experience momentum
    and decay so the update rule stays uniform across a set).
    """
    for name in params.names():
        theta = params[name]
        v = velocity[name]
        g = grads[name] if name in grads else np.zeros_like(theta)
        if weight_decay and decays(name):
            g = g + weight_decay * theta
        v *= momentum
        v -= lr * g
        theta += v
