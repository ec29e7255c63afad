"""Pure-numpy convolution kernels, used when the compiled extension is absent.

Same contract as the compiled module: channels-last float64 arrays, kernel
shape (3, 3, 3, C_in, C_out), zero padding that preserves every dimension,
dilation on the temporal axis only.
"""
import numpy as np


def _im2col(x, dilation):
    n, h, w, c = x.shape
    d = dilation
    xp = np.pad(x, ((d, d), (1, 1), (1, 1), (0, 0)))
    cols = np.empty((n, h, w, 27, c))
    k = 0
    for kt in range(3):
        for kh in range(3):
            for kw in range(3):
                cols[:, :, :, k, :] = xp[kt * d:kt * d + n, kh:kh + h, kw:kw + w, :]
                k += 1
    return cols.reshape(n * h * w, 27 * c)


def conv3d_forward(x, w, b, dilation):
    x = np.asarray(x, dtype=np.float64)
    n, h, wd, c = x.shape
    k = w.shape[4]
    out = _im2col(x, dilation) @ w.reshape(27 * c, k) + b
    return out.reshape(n, h, wd, k)


def conv3d_backward(x, w, grad_out, dilation, weight_grad=True):
    x = np.asarray(x, dtype=np.float64)
    n, h, wd, c = x.shape
    k = w.shape[4]
    d = dilation
    g2 = np.asarray(grad_out, dtype=np.float64).reshape(n * h * wd, k)

    gcols = (g2 @ w.reshape(27 * c, k).T).reshape(n, h, wd, 27, c)
    gxp = np.zeros((n + 2 * d, h + 2, wd + 2, c))
    idx = 0
    for kt in range(3):
        for kh in range(3):
            for kw in range(3):
                gxp[kt * d:kt * d + n, kh:kh + h, kw:kw + wd, :] += gcols[:, :, :, idx, :]
                idx += 1
    gx = np.ascontiguousarray(gxp[d:d + n, 1:1 + h, 1:1 + wd])
    if not weight_grad:
        return gx, None, None
    gw = (_im2col(x, dilation).T @ g2).reshape(w.shape)
    return gx, gw, g2.sum(axis=0)
