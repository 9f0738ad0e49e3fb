"""NumPy kernel backend: im2col convolution and RoI max-pooling.

Semantics shared with the compiled backend:

* conv2d: cross-correlation, zero padding, output size (H+2p-kh)//s + 1.
* RoI max-pool: the pooled cell window [r0,r1)x[c0,c1) is partitioned into
  oh x ow bins; bin i spans cells [floor(i*n/oh), ceil((i+1)*n/oh)), which is
  never empty for n >= 1. Ties in the max go to the first cell in row-major
  order so both backends report identical argmax indices.
"""

import numpy as np

BACKEND = "numpy"


def _strided_patches(xp, stride, kh, kw, ho, wo):
    n, c = xp.shape[:2]
    s0, s1, s2, s3 = xp.strides
    return np.lib.stride_tricks.as_strided(
        xp, (n, c, ho, wo, kh, kw), (s0, s1, s2 * stride, s3 * stride, s2, s3)
    )


def conv2d_fwd(x, w, stride, pad):
    n, cin, h, wi = x.shape
    cout, _, kh, kw = w.shape
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho = (h + 2 * pad - kh) // stride + 1
    wo = (wi + 2 * pad - kw) // stride + 1
    patches = _strided_patches(xp, stride, kh, kw, ho, wo)
    y = np.tensordot(patches, w, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(y.transpose(0, 3, 1, 2))


def conv2d_bwd_input(gy, w, stride, pad, h, wi):
    n, cout, ho, wo = gy.shape
    _, cin, kh, kw = w.shape
    gxp = np.zeros((n, cin, h + 2 * pad, wi + 2 * pad), dtype=gy.dtype)
    # g[n, ho, wo, cin, kh, kw]: contribution of each output cell per tap
    g = np.tensordot(gy, w, axes=([1], [0]))
    for i in range(kh):
        for j in range(kw):
            gxp[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += (
                g[:, :, :, :, i, j].transpose(0, 3, 1, 2)
            )
    if pad == 0:
        return gxp
    return np.ascontiguousarray(gxp[:, :, pad:pad + h, pad:pad + wi])


def conv2d_bwd_weight(x, gy, stride, pad, kh, kw):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    ho, wo = gy.shape[2], gy.shape[3]
    patches = _strided_patches(xp, stride, kh, kw, ho, wo)
    return np.tensordot(gy, patches, axes=([0, 2, 3], [0, 2, 3]))


def _ceil_div(a, b):
    return -((-a) // b)


def roi_maxpool_fwd(fmap, cells, oh, ow):
    """Pool each cell window in `cells` ([B,4] int64 rows r0,c0,r1,c1).

    Returns (out [B,C,oh,ow], arg [B,C,oh,ow]) where arg holds flat row-major
    indices into the H*W map plane.
    """
    c, h, w = fmap.shape
    b = cells.shape[0]
    out = np.empty((b, c, oh, ow), dtype=fmap.dtype)
    arg = np.empty((b, c, oh, ow), dtype=np.int64)
    chans = np.arange(c)
    for k in range(b):
        r0, c0, r1, c1 = (int(v) for v in cells[k])
        nr, nc = r1 - r0, c1 - c0
        for i in range(oh):
            rs = r0 + (i * nr) // oh
            re = r0 + _ceil_div((i + 1) * nr, oh)
            for j in range(ow):
                cs = c0 + (j * nc) // ow
                ce = c0 + _ceil_div((j + 1) * nc, ow)
                sub = fmap[:, rs:re, cs:ce].reshape(c, -1)
                idx = np.argmax(sub, axis=1)
                out[k, :, i, j] = sub[chans, idx]
                arg[k, :, i, j] = (rs + idx // (ce - cs)) * w + (cs + idx % (ce - cs))
    return out, arg


def roi_maxpool_bwd(gout, arg, c, h, w):
    """Scatter-add pooled gradients back onto a [C,H,W] map."""
    gmap = np.zeros((c, h * w), dtype=gout.dtype)
    chans = np.arange(c)[None, :, None, None]
    np.add.at(gmap, (np.broadcast_to(chans, arg.shape), arg), gout)
    return gmap.reshape(c, h, w)
