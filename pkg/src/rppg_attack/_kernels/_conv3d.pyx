# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled 3x3x3 dilated convolution kernels (channels-last, float64)."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef extern from "conv3d_core.h":
    void conv3d_forward_k8(const double *xp, const double *w, const double *b,
                           double *out, int N, int H, int W, int C, int K, int d) nogil
    void conv3d_weight_grad_k8(const double *xp, const double *g, double *gw,
                               int N, int H, int W, int C, int K, int d) nogil


cdef inline int _round8(int k):
    return (k + 7) // 8 * 8


def _pad_out_channels(w, b):
    k = w.shape[4]
    kp = _round8(k)
    if kp == k:
        return np.ascontiguousarray(w, dtype=np.float64), np.ascontiguousarray(b, dtype=np.float64)
    wp = np.zeros(w.shape[:4] + (kp,))
    wp[..., :k] = w
    bp = np.zeros(kp)
    bp[:k] = b
    return wp, bp


def _forward_padded(xp, w, b, int n, int h, int wd, int d):
    cdef int c = xp.shape[3]
    k = w.shape[4]
    wp, bp = _pad_out_channels(w, b)
    cdef int kp = wp.shape[4]
    out = np.empty((n, h, wd, kp))
    cdef double[:, :, :, ::1] xv = xp
    cdef double[:, :, :, :, ::1] wv = wp
    cdef double[::1] bv = bp
    cdef double[:, :, :, ::1] ov = out
    with nogil:
        conv3d_forward_k8(&xv[0, 0, 0, 0], &wv[0, 0, 0, 0, 0], &bv[0], &ov[0, 0, 0, 0],
                          n, h, wd, c, kp, d)
    if kp != k:
        out = np.ascontiguousarray(out[..., :k])
    return out


def conv3d_forward(x, w, b, int dilation):
    """Zero-padded 'same' convolution of ``x`` (N, H, W, C) with ``w`` (3, 3, 3, C, K)."""
    x = np.asarray(x, dtype=np.float64)
    xp = np.ascontiguousarray(np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0))))
    return _forward_padded(xp, w, b, x.shape[0], x.shape[1], x.shape[2], dilation)


def conv3d_backward(x, w, grad_out, int dilation, bint weight_grad=True):
    """Gradients of :func:`conv3d_forward` w.r.t. input, weights and bias.

    The input gradient is the forward pass of ``grad_out`` with the spatially
    and temporally flipped, channel-transposed kernel. Weight and bias
    gradients are ``None`` when ``weight_grad`` is false.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.ascontiguousarray(grad_out, dtype=np.float64)
    cdef int n = x.shape[0], h = x.shape[1], wd = x.shape[2], c = x.shape[3]
    w = np.asarray(w, dtype=np.float64)
    w_flip = np.ascontiguousarray(w[::-1, ::-1, ::-1].transpose(0, 1, 2, 4, 3))
    gp = np.ascontiguousarray(np.pad(g, ((0, 0), (1, 1), (1, 1), (0, 0))))
    gx = _forward_padded(gp, w_flip, np.zeros(c), n, h, wd, dilation)
    if not weight_grad:
        return gx, None, None

    k = w.shape[4]
    cdef int kp = _round8(k)
    if kp != k:
        gk = np.zeros((n, h, wd, kp))
        gk[..., :k] = g
    else:
        gk = g
    xp = np.ascontiguousarray(np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0))))
    gw = np.zeros((3, 3, 3, c, kp))
    cdef double[:, :, :, ::1] xv = xp
    cdef double[:, :, :, ::1] gv = gk
    cdef double[:, :, :, :, ::1] gwv = gw
    with nogil:
        conv3d_weight_grad_k8(&xv[0, 0, 0, 0], &gv[0, 0, 0, 0], &gwv[0, 0, 0, 0, 0],
                              n, h, wd, c, kp, dilation)
    if kp != k:
        gw = np.ascontiguousarray(gw[..., :k])
    gb = g.reshape(-1, k).sum(axis=0)
    return gx, gw, gb
