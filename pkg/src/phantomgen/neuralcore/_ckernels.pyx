# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batch kernels for the training inner loop.

Mirrors kernels_py exactly: activations (B, L, C) float64 C-contiguous,
conv weights (K, Cin, Cout), biases (Cout,).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def conv1d_forward(double[:, :, ::1] x, double[:, :, ::1] w, double[::1] b, bint relu=False):
    cdef Py_ssize_t n = x.shape[0], length = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], cout = w.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    out_arr = np.empty((n, length, cout), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, :, ::1] wt
    cdef Py_ssize_t bi, i, kk, c, o, src
    cdef double xv, acc
    if cout < 8 and cin >= 8:
        # few output channels: vectorize the contiguous input-channel axis
        wt = np.ascontiguousarray(np.transpose(w, (0, 2, 1)))
        with nogil:
            for bi in range(n):
                for i in range(length):
                    for o in range(cout):
                        acc = b[o]
                        for kk in range(k):
                            src = i + kk - pad
                            if src < 0 or src >= length:
                                continue
                            for c in range(cin):
                                acc += x[bi, src, c] * wt[kk, o, c]
                        out[bi, i, o] = acc
    else:
        with nogil:
            for bi in range(n):
                for i in range(length):
                    for o in range(cout):
                        out[bi, i, o] = b[o]
                    for kk in range(k):
                        src = i + kk - pad
                        if src < 0 or src >= length:
                            continue
                        for c in range(cin):
                            xv = x[bi, src, c]
                            if xv == 0.0:
                                continue
                            for o in range(cout):
                                out[bi, i, o] += xv * w[kk, c, o]
    if relu:
        np.maximum(out_arr, 0.0, out=out_arr)
    return out_arr


def conv1d_backward(double[:, :, ::1] x, double[:, :, ::1] w, double[:, :, ::1] grad_out,
                    double[:, :, ::1] relu_out=None):
    """Gradients of conv1d_forward; ``relu_out`` (the forward output) gates
    the upstream gradient when the layer had a fused relu."""
    cdef Py_ssize_t n = x.shape[0], length = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t k = w.shape[0], cout = w.shape[2]
    cdef Py_ssize_t pad = (k - 1) // 2
    cdef bint gated = relu_out is not None
    gx_arr = np.zeros((n, length, cin), dtype=np.float64)
    gw_arr = np.zeros((k, cin, cout), dtype=np.float64)
    gb_arr = np.zeros(cout, dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef double[:, :, ::1] gw = gw_arr
    cdef double[::1] gb = gb_arr
    cdef double[:, :, ::1] wt, gwt
    cdef Py_ssize_t bi, i, kk, c, o, src
    cdef double go, acc, xv
    if cout < 8 and cin >= 8:
        wt = np.ascontiguousarray(np.transpose(w, (0, 2, 1)))
        gwt_arr = np.zeros((k, cout, cin), dtype=np.float64)
        gwt = gwt_arr
        with nogil:
            for bi in range(n):
                for i in range(length):
                    for o in range(cout):
                        go = grad_out[bi, i, o]
                        if gated and relu_out[bi, i, o] == 0.0:
                            continue
                        gb[o] += go
                        if go == 0.0:
                            continue
                        for kk in range(k):
                            src = i + kk - pad
                            if src < 0 or src >= length:
                                continue
                            for c in range(cin):
                                gwt[kk, o, c] += go * x[bi, src, c]
                                gx[bi, src, c] += go * wt[kk, o, c]
        gw_arr[...] = np.transpose(gwt_arr, (0, 2, 1))
        return gx_arr, gw_arr, gb_arr
    go_buf_arr = np.empty(cout, dtype=np.float64)
    cdef double[::1] go_buf = go_buf_arr
    with nogil:
        for bi in range(n):
            for i in range(length):
                for o in range(cout):
                    go = grad_out[bi, i, o]
                    if gated and relu_out[bi, i, o] == 0.0:
                        go = 0.0
                    go_buf[o] = go
                    gb[o] += go
                for kk in range(k):
                    src = i + kk - pad
                    if src < 0 or src >= length:
                        continue
                    for c in range(cin):
                        acc = 0.0
                        xv = x[bi, src, c]
                        if xv == 0.0:
                            for o in range(cout):
                                acc += w[kk, c, o] * go_buf[o]
                        else:
                            for o in range(cout):
                                go = go_buf[o]
                                gw[kk, c, o] += xv * go
                                acc += w[kk, c, o] * go
                        gx[bi, src, c] += acc
    return gx_arr, gw_arr, gb_arr


cdef inline double _splitmix_uniform(unsigned long long z) nogil:
    z ^= z >> 30
    z *= <unsigned long long>0xBF58476D1CE4E5B9
    z ^= z >> 27
    z *= <unsigned long long>0x94D049BB133111EB
    z ^= z >> 31
    return <double>(z >> 11) * (1.0 / 9007199254740992.0)


def dropout_forward(double[:, :, ::1] x, double rate, unsigned long long seed):
    """Inverted dropout with a splitmix64 mask stream; returns (out, scale)
    where scale holds 0 or 1/(1-rate) per element for the backward pass."""
    cdef Py_ssize_t n = x.shape[0], length = x.shape[1], c = x.shape[2]
    out_arr = np.empty((n, length, c), dtype=np.float64)
    scale_arr = np.empty((n, length, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef double[:, :, ::1] scale = scale_arr
    cdef double keep_scale = 1.0 / (1.0 - rate)
    cdef unsigned long long ctr = 0
    cdef unsigned long long golden = <unsigned long long>0x9E3779B97F4A7C15
    cdef Py_ssize_t bi, i, cc
    cdef double m
    with nogil:
        for bi in range(n):
            for i in range(length):
                for cc in range(c):
                    ctr += 1
                    # branch-free: random masks defeat the branch predictor
                    m = (<double>(_splitmix_uniform(seed + ctr * golden) >= rate)) * keep_scale
                    scale[bi, i, cc] = m
                    out[bi, i, cc] = x[bi, i, cc] * m
    return out_arr, scale_arr


def adam_step(double[::1] p, double[::1] g, double[::1] m, double[::1] v,
              double lr, double beta1, double beta2, double eps,
              double bias1, double bias2):
    """One fused Adam update over flat parameter/gradient vectors."""
    cdef Py_ssize_t n = p.shape[0]
    cdef Py_ssize_t i
    cdef double gi, mh, vh
    cdef double om1 = 1.0 - beta1, om2 = 1.0 - beta2
    with nogil:
        for i in range(n):
            gi = g[i]
            m[i] = beta1 * m[i] + om1 * gi
            v[i] = beta2 * v[i] + om2 * gi * gi
            mh = m[i] / bias1
            vh = v[i] / bias2
            p[i] -= lr * mh / (sqrt(vh) + eps)


def maxpool1d_forward(double[:, :, ::1] x, Py_ssize_t pool):
    cdef Py_ssize_t n = x.shape[0], length = x.shape[1], c = x.shape[2]
    cdef Py_ssize_t lo = length // pool
    out_arr = np.empty((n, lo, c), dtype=np.float64)
    idx_arr = np.empty((n, lo, c), dtype=np.int64)
    cdef double[:, :, ::1] out = out_arr
    cdef long long[:, :, ::1] idx = idx_arr
    cdef Py_ssize_t bi, i, j, cc, base, best_j
    cdef double best, v
    with nogil:
        for bi in range(n):
            for i in range(lo):
                base = i * pool
                for cc in range(c):
                    best = x[bi, base, cc]
                    best_j = base
                    for j in range(1, pool):
                        v = x[bi, base + j, cc]
                        if v > best:  # strict: ties stay at the lowest index
                            best = v
                            best_j = base + j
                    out[bi, i, cc] = best
                    idx[bi, i, cc] = best_j
    return out_arr, idx_arr


def maxpool1d_backward(double[:, :, ::1] grad_out, long long[:, :, ::1] abs_idx, Py_ssize_t length):
    cdef Py_ssize_t n = grad_out.shape[0], lo = grad_out.shape[1], c = grad_out.shape[2]
    gx_arr = np.zeros((n, length, c), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t bi, i, cc
    with nogil:
        for bi in range(n):
            for i in range(lo):
                for cc in range(c):
                    gx[bi, abs_idx[bi, i, cc], cc] += grad_out[bi, i, cc]
    return gx_arr


def upsample1d_forward(double[:, :, ::1] x, Py_ssize_t size):
    cdef Py_ssize_t n = x.shape[0], length = x.shape[1], c = x.shape[2]
    out_arr = np.empty((n, length * size, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t bi, i, s, cc
    with nogil:
        for bi in range(n):
            for i in range(length):
                for s in range(size):
                    for cc in range(c):
                        out[bi, i * size + s, cc] = x[bi, i, cc]
    return out_arr


def upsample1d_backward(double[:, :, ::1] grad_out, Py_ssize_t size):
    cdef Py_ssize_t n = grad_out.shape[0], ls = grad_out.shape[1], c = grad_out.shape[2]
    cdef Py_ssize_t lo = ls // size
    gx_arr = np.zeros((n, lo, c), dtype=np.float64)
    cdef double[:, :, ::1] gx = gx_arr
    cdef Py_ssize_t bi, i, s, cc
    with nogil:
        for bi in range(n):
            for i in range(lo):
                for s in range(size):
                    for cc in range(c):
                        gx[bi, i, cc] += grad_out[bi, i * size + s, cc]
    return gx_arr
