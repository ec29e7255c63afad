"""Central finite-difference checks for MicroPulseNet, shared by the unit
and acceptance tests."""
import numpy as np

from rppg_attack.estimators.micronet import (backward_array, forward_array, init_params,
                                             pearson_loss)

H = W = 4
N = 16


def composite_loss(params, x, target):
    y, _ = forward_array(params, x)
    return pearson_loss(y, target).value


def analytic(params, x, target):
    y, cache = forward_array(params, x)
    lv = pearson_loss(y, target)
    grads, gx = backward_array(params, cache, lv.grad_wrt_prediction)
    return grads.arrays(), gx


def rel_err(a, b) -> float:
    a, b = np.ravel(a), np.ravel(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-12))


def check_clip(seed: int, n_param_samples: int = 100, step: float = 1e-4):
    """Return (input relative error, parameter relative error) for one
    random 16x4x4x3 clip and random parameters."""
    rng = np.random.default_rng(seed)
    params = init_params(H, W, seed=seed)
    params = params.with_arrays([a + rng.normal(0, 0.05, a.shape) for a in params.arrays()])
    x = rng.uniform(60, 200, size=(N, H, W, 3))
    target = np.sin(2 * np.pi * rng.uniform(0.5, 3) * np.arange(N) / 30 + rng.uniform(0, 6))
    pgrads, gx = analytic(params, x, target)

    fd_x = np.empty(x.size)
    flat = x.reshape(-1)
    for i in range(x.size):
        old = flat[i]
        flat[i] = old + step
        up = composite_loss(params, x, target)
        flat[i] = old - step
        down = composite_loss(params, x, target)
        flat[i] = old
        fd_x[i] = (up - down) / (2 * step)
    err_x = rel_err(gx, fd_x)

    arrays = [a.copy() for a in params.arrays()]
    sizes = [a.size for a in arrays]
    offsets = np.cumsum([0] + sizes)
    picks = rng.choice(offsets[-1], size=min(n_param_samples, offsets[-1]), replace=False)
    fd_p, an_p = [], []
    flat_grad = np.concatenate([np.ravel(g) for g in pgrads])
    for idx in picks:
        k = int(np.searchsorted(offsets, idx, side="right") - 1)
        j = idx - offsets[k]
        a = arrays[k].reshape(-1)
        old = a[j]
        a[j] = old + step
        up = composite_loss(params.with_arrays(arrays), x, target)
        a[j] = old - step
        down = composite_loss(params.with_arrays(arrays), x, target)
        a[j] = old
        fd_p.append((up - down) / (2 * step))
        an_p.append(flat_grad[idx])
    return err_x, rel_err(an_p, fd_p)


def check_pearson(seed: int, n: int = 32, step: float = 1e-4) -> float:
    rng = np.random.default_rng(seed)
    p = rng.normal(size=n)
    t = rng.normal(size=n)
    g = pearson_loss(p, t).grad_wrt_prediction
    fd = np.empty(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = step
        fd[i] = (pearson_loss(p + e, t).value - pearson_loss(p - e, t).value) / (2 * step)
    return rel_err(g, fd)
