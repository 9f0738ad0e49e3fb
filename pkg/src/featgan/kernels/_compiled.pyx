# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled kernel backend: direct-loop convolution and RoI max-pooling.

Same contracts as the NumPy backend (see _numpy.py); hot loops are typed and
run without the GIL. float32 and float64 are both supported via fused types.
Convolution loops are arranged axpy-style: the padding window is hoisted into
[lo, hi) index ranges so the innermost loop is branch-free and unit-stride
for stride-1 kernels, which lets the C compiler vectorize it.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

ctypedef fused real:
    float
    double

BACKEND = "compiled"


cdef inline Py_ssize_t _lo(Py_ssize_t off, Py_ssize_t stride) nogil:
    # smallest j with j*stride + off >= 0
    if off >= 0:
        return 0
    return (-off + stride - 1) // stride


cdef inline Py_ssize_t _hi(Py_ssize_t off, Py_ssize_t stride,
                           Py_ssize_t limit, Py_ssize_t cap) nogil:
    # smallest j with j*stride + off >= limit, clipped to cap
    cdef Py_ssize_t v = (limit - off + stride - 1) // stride
    if v < 0:
        return 0
    return v if v < cap else cap


def conv2d_fwd(real[:, :, :, ::1] x, real[:, :, :, ::1] w, int stride, int pad):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wi = x.shape[3]
    cdef Py_ssize_t cout = w.shape[0], kh = w.shape[2], kw = w.shape[3]
    cdef Py_ssize_t ho = (h + 2 * pad - kh) // stride + 1
    cdef Py_ssize_t wo = (wi + 2 * pad - kw) // stride + 1
    if real is float:
        y_arr = np.zeros((n, cout, ho, wo), dtype=np.float32)
    else:
        y_arr = np.zeros((n, cout, ho, wo), dtype=np.float64)
    cdef real[:, :, :, ::1] y = y_arr
    cdef Py_ssize_t b, o, c, i, j, p, q, iy, poff, qoff
    cdef Py_ssize_t ilo, ihi, jlo, jhi
    cdef real wv
    with nogil:
        for b in range(n):
            for o in range(cout):
                for c in range(cin):
                    for p in range(kh):
                        poff = p - pad
                        ilo = _lo(poff, stride)
                        ihi = _hi(poff, stride, h, ho)
                        for q in range(kw):
                            wv = w[o, c, p, q]
                            if wv == 0:
                                continue
                            qoff = q - pad
                            jlo = _lo(qoff, stride)
                            jhi = _hi(qoff, stride, wi, wo)
                            for i in range(ilo, ihi):
                                iy = i * stride + poff
                                for j in range(jlo, jhi):
                                    y[b, o, i, j] += wv * x[b, c, iy, j * stride + qoff]
    return y_arr


def conv2d_bwd_input(real[:, :, :, ::1] gy, real[:, :, :, ::1] w,
                     int stride, int pad, int h, int wi):
    cdef Py_ssize_t n = gy.shape[0], cout = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    cdef Py_ssize_t cin = w.shape[1], kh = w.shape[2], kw = w.shape[3]
    if real is float:
        gx_arr = np.zeros((n, cin, h, wi), dtype=np.float32)
    else:
        gx_arr = np.zeros((n, cin, h, wi), dtype=np.float64)
    cdef real[:, :, :, ::1] gx = gx_arr
    cdef Py_ssize_t b, o, c, i, j, p, q, iy, poff, qoff
    cdef Py_ssize_t ilo, ihi, jlo, jhi
    cdef real wv
    with nogil:
        for b in range(n):
            for o in range(cout):
                for c in range(cin):
                    for p in range(kh):
                        poff = p - pad
                        ilo = _lo(poff, stride)
                        ihi = _hi(poff, stride, h, ho)
                        for q in range(kw):
                            wv = w[o, c, p, q]
                            if wv == 0:
                                continue
                            qoff = q - pad
                            jlo = _lo(qoff, stride)
                            jhi = _hi(qoff, stride, wi, wo)
                            for i in range(ilo, ihi):
                                iy = i * stride + poff
                                for j in range(jlo, jhi):
                                    gx[b, c, iy, j * stride + qoff] += wv * gy[b, o, i, j]
    return gx_arr


def conv2d_bwd_weight(real[:, :, :, ::1] x, real[:, :, :, ::1] gy,
                      int stride, int pad, int kh, int kw):
    cdef Py_ssize_t n = x.shape[0], cin = x.shape[1], h = x.shape[2], wi = x.shape[3]
    cdef Py_ssize_t cout = gy.shape[1], ho = gy.shape[2], wo = gy.shape[3]
    if real is float:
        gw_arr = np.zeros((cout, cin, kh, kw), dtype=np.float32)
    else:
        gw_arr = np.zeros((cout, cin, kh, kw), dtype=np.float64)
    cdef real[:, :, :, ::1] gw = gw_arr
    cdef Py_ssize_t b, o, c, i, j, p, q, iy, poff, qoff
    cdef Py_ssize_t ilo, ihi, jlo, jhi
    cdef real acc
    with nogil:
        for o in range(cout):
            for c in range(cin):
                for p in range(kh):
                    poff = p - pad
                    ilo = _lo(poff, stride)
                    ihi = _hi(poff, stride, h, ho)
                    for q in range(kw):
                        qoff = q - pad
                        jlo = _lo(qoff, stride)
                        jhi = _hi(qoff, stride, wi, wo)
                        acc = 0
                        for b in range(n):
                            for i in range(ilo, ihi):
                                iy = i * stride + poff
                                for j in range(jlo, jhi):
                                    acc += gy[b, o, i, j] * x[b, c, iy, j * stride + qoff]
                        gw[o, c, p, q] = acc
    return gw_arr


def roi_maxpool_fwd(real[:, :, ::1] fmap, cnp.int64_t[:, ::1] cells,
                    int oh, int ow):
    cdef Py_ssize_t c = fmap.shape[0], h = fmap.shape[1], w = fmap.shape[2]
    cdef Py_ssize_t b = cells.shape[0]
    if real is float:
        out_arr = np.empty((b, c, oh, ow), dtype=np.float32)
    else:
        out_arr = np.empty((b, c, oh, ow), dtype=np.float64)
    arg_arr = np.empty((b, c, oh, ow), dtype=np.int64)
    cdef real[:, :, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, :, ::1] arg = arg_arr
    cdef Py_ssize_t k, ch, i, j, r0, c0, nr, nc, rs, re, cs, ce, r, cc
    cdef Py_ssize_t best_idx
    cdef real best, v
    with nogil:
        for k in range(b):
            r0 = cells[k, 0]
            c0 = cells[k, 1]
            nr = cells[k, 2] - r0
            nc = cells[k, 3] - c0
            for ch in range(c):
                for i in range(oh):
                    rs = r0 + (i * nr) // oh
                    re = r0 + ((i + 1) * nr + oh - 1) // oh
                    for j in range(ow):
                        cs = c0 + (j * nc) // ow
                        ce = c0 + ((j + 1) * nc + ow - 1) // ow
                        best = fmap[ch, rs, cs]
                        best_idx = rs * w + cs
                        for r in range(rs, re):
                            for cc in range(cs, ce):
                                v = fmap[ch, r, cc]
                                if v > best:
                                    best = v
                                    best_idx = r * w + cc
                        out[k, ch, i, j] = best
                        arg[k, ch, i, j] = best_idx
    return out_arr, arg_arr


def roi_maxpool_bwd(real[:, :, :, ::1] gout, cnp.int64_t[:, :, :, ::1] arg,
                    int c, int h, int w):
    if real is float:
        gmap_arr = np.zeros((c, h * w), dtype=np.float32)
    else:
        gmap_arr = np.zeros((c, h * w), dtype=np.float64)
    cdef real[:, ::1] gmap = gmap_arr
    cdef Py_ssize_t b = gout.shape[0], oh = gout.shape[2], ow = gout.shape[3]
    cdef Py_ssize_t k, ch, i, j
    with nogil:
        for k in range(b):
            for ch in range(c):
                for i in range(oh):
                    for j in range(ow):
                        gmap[ch, arg[k, ch, i, j]] += gout[k, ch, i, j]
    return gmap_arr.reshape(c, h, w)
