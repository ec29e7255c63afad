"""MicroPulseNet: a three-layer temporally dilated 3-D CNN with hand-written
forward and backward passes.

Architecture, input (N, H, W, 3) on the [0, 255] scale:

    x -> subtract per-pixel temporal mean, divide by input_scale
      -> conv3x3x3(3->8, dilation 1) -> tanh
      -> conv3x3x3(8->8, dilation 2) -> tanh
      -> conv3x3x3(8->8, dilation 4) -> tanh
      -> spatial global average -> linear 8->1 per frame

The mean subtraction makes the network blind to constant pixel offsets.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import _kernels
from ..core import ShapeMismatch, VideoClip, Waveform, ZeroVariance
from ..npyio import read_npy, write_npy

DILATIONS = (1, 2, 4)
CHANNELS = (3, 8, 8, 8)
MIN_FRAMES = 13


@dataclass
class MicroNetParams:
    kernels: list  # three (3, 3, 3, C_in, C_out) arrays
    biases: list  # three (C_out,) arrays
    out_weight: np.ndarray  # (8,)
    out_bias: float
    height: int
    width: int
    input_scale: float = 1.0
    dilations: tuple = DILATIONS

    def __post_init__(self):
        self.kernels = [np.asarray(k, dtype=np.float64) for k in self.kernels]
        self.biases = [np.asarray(b, dtype=np.float64).reshape(-1) for b in self.biases]
        self.out_weight = np.asarray(self.out_weight, dtype=np.float64).reshape(-1)
        self.out_bias = float(self.out_bias)
        self.dilations = tuple(int(d) for d in self.dilations)
        if len(self.kernels) != 3 or len(self.biases) != 3 or len(self.dilations) != 3:
            raise ShapeMismatch("MicroNetParams needs exactly three conv layers")
        for i, (k, b) in enumerate(zip(self.kernels, self.biases)):
            expect = (3, 3, 3, CHANNELS[i], CHANNELS[i + 1])
            if k.shape != expect or b.shape != (CHANNELS[i + 1],):
                raise ShapeMismatch(f"layer {i}: kernel {k.shape}, bias {b.shape}; expected {expect}")
        if self.out_weight.shape != (CHANNELS[-1],):
            raise ShapeMismatch(f"output weight must be ({CHANNELS[-1]},), got {self.out_weight.shape}")
        if not all(np.all(np.isfinite(a)) for a in self.arrays()):
            raise ValueError("parameters must be finite")

    def arrays(self) -> list:
        """Flat parameter list in a fixed order (kernels, biases, output)."""
        return [*self.kernels, *self.biases, self.out_weight, np.array([self.out_bias])]

    @property
    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())

    def copy(self) -> "MicroNetParams":
        return MicroNetParams(
            [k.copy() for k in self.kernels], [b.copy() for b in self.biases],
            self.out_weight.copy(), self.out_bias, self.height, self.width,
            self.input_scale, self.dilations,
        )

    def with_arrays(self, arrays) -> "MicroNetParams":
        a = list(arrays)
        return MicroNetParams(a[0:3], a[3:6], a[6], float(np.asarray(a[7]).reshape(-1)[0]),
                              self.height, self.width, self.input_scale, self.dilations)

    def to_float32(self) -> "MicroNetParams":
        """Round every value to float32 precision so NPY storage is lossless."""
        return self.with_arrays([a.astype(np.float32).astype(np.float64) for a in self.arrays()])


@dataclass
class ParamGrads:
    kernels: list
    biases: list
    out_weight: np.ndarray
    out_bias: float

    def arrays(self) -> list:
        return [*self.kernels, *self.biases, self.out_weight, np.array([self.out_bias])]


@dataclass
class ForwardCache:
    shape: tuple
    layer_inputs: list = field(default_factory=list)
    activations: list = field(default_factory=list)
    pooled: np.ndarray | None = None
    input_scale: float = 1.0


@dataclass(frozen=True)
class LossValue:
    value: float
    grad_wrt_prediction: np.ndarray


def init_params(height: int, width: int, seed: int = 0, input_scale: float = 1.0) -> MicroNetParams:
    rng = np.random.default_rng(seed)
    kernels, biases = [], []
    for cin, cout in zip(CHANNELS[:-1], CHANNELS[1:]):
        std = 1.0 / np.sqrt(27 * cin)
        kernels.append(rng.normal(0.0, std, size=(3, 3, 3, cin, cout)))
        biases.append(np.zeros(cout))
    out_w = rng.normal(0.0, 1.0 / np.sqrt(CHANNELS[-1]), size=CHANNELS[-1])
    return MicroNetParams(kernels, biases, out_w, 0.0, height, width, input_scale).to_float32()


def zero_params(height: int, width: int) -> MicroNetParams:
    kernels = [np.zeros((3, 3, 3, a, b)) for a, b in zip(CHANNELS[:-1], CHANNELS[1:])]
    biases = [np.zeros(b) for b in CHANNELS[1:]]
    return MicroNetParams(kernels, biases, np.zeros(CHANNELS[-1]), 0.0, height, width)


def _check_input(params: MicroNetParams, x: np.ndarray) -> None:
    if x.ndim != 4 or x.shape[3] != 3:
        raise ShapeMismatch(f"expected (N, H, W, 3) input, got {x.shape}")
    if x.shape[1:3] != (params.height, params.width):
        raise ShapeMismatch(
            f"clip is {x.shape[1]}x{x.shape[2]}, network was built for {params.height}x{params.width}")
    if x.shape[0] < MIN_FRAMES:
        raise ShapeMismatch(f"need at least {MIN_FRAMES} frames, got {x.shape[0]}")


def forward_array(params: MicroNetParams, x: np.ndarray):
    """Forward pass on a raw (N, H, W, 3) array. Returns (prediction, cache)."""
    x = np.asarray(x, dtype=np.float64)
    _check_input(params, x)
    cache = ForwardCache(shape=x.shape, input_scale=params.input_scale)
    h = (x - x.mean(axis=0)) / params.input_scale
    for k, b, d in zip(params.kernels, params.biases, params.dilations):
        cache.layer_inputs.append(h)
        h = np.tanh(_kernels.conv3d_forward(h, k, b, d))
        cache.activations.append(h)
    pooled = h.mean(axis=(1, 2))
    cache.pooled = pooled
    return pooled @ params.out_weight + params.out_bias, cache


def backward_array(params: MicroNetParams, cache: ForwardCache, dy, param_grads: bool = True):
    """Backpropagate ``dy`` (gradient w.r.t. the per-frame output).

    Returns ``(ParamGrads or None, input gradient)``.
    """
    dy = np.asarray(dy, dtype=np.float64).reshape(-1)
    n, hgt, wid, _ = cache.shape
    if dy.size != n:
        raise ShapeMismatch(f"loss gradient has {dy.size} entries for {n} frames")
    g_out_w = cache.pooled.T @ dy if param_grads else None
    g_out_b = float(dy.sum())
    g = np.broadcast_to((dy[:, None] * params.out_weight)[:, None, None, :] / (hgt * wid),
                        cache.activations[-1].shape)
    g_k, g_b = [None] * 3, [None] * 3
    for i in (2, 1, 0):
        act = cache.activations[i]
        g = g * (1.0 - act * act)
        g, g_k[i], g_b[i] = _kernels.conv3d_backward(
            cache.layer_inputs[i], params.kernels[i], g, params.dilations[i], weight_grad=param_grads)
    gx = (g - g.mean(axis=0)) / cache.input_scale
    grads = ParamGrads(g_k, g_b, g_out_w, g_out_b) if param_grads else None
    return grads, gx


def micro_forward(params: MicroNetParams, clip: VideoClip):
    y, cache = forward_array(params, clip.data)
    return Waveform(y, clip.fps), cache


def micro_backward(params: MicroNetParams, cache: ForwardCache, loss_grad):
    if isinstance(loss_grad, LossValue):
        loss_grad = loss_grad.grad_wrt_prediction
    return backward_array(params, cache, loss_grad, param_grads=True)


def pearson_loss(pred, target) -> LossValue:
    """1 - Pearson correlation, with its analytic gradient w.r.t. ``pred``."""
    p = np.asarray(pred.samples if isinstance(pred, Waveform) else pred, dtype=np.float64)
    t = np.asarray(target.samples if isinstance(target, Waveform) else target, dtype=np.float64)
    if p.shape != t.shape:
        raise ShapeMismatch(f"prediction {p.shape} and target {t.shape} differ")
    if p.size < 2:
        raise ShapeMismatch("Pearson loss needs at least two samples")
    pc = p - p.mean()
    tc = t - t.mean()
    sp = np.sqrt(np.mean(pc * pc))
    st = np.sqrt(np.mean(tc * tc))
    if sp < 1e-12 or st < 1e-12:
        raise ZeroVariance("Pearson correlation undefined for a constant signal")
    rho = float(np.mean(pc * tc) / (sp * st))
    rho = min(1.0, max(-1.0, rho))
    n = p.size
    drho = (tc / (sp * st) - rho * pc / (sp * sp)) / n
    return LossValue(1.0 - rho, -drho)


class MicroPulseNet:
    """PulseEstimator wrapper around trained parameters."""

    name = "micronet"
    clip_based = True

    def __init__(self, params: MicroNetParams):
        self.params = params

    def estimate(self, clip: VideoClip) -> Waveform:
        return micro_forward(self.params, clip)[0]

    def loss_and_input_grad(self, x: np.ndarray, target: np.ndarray):
        """Pearson loss against ``target`` and its gradient w.r.t. the clip."""
        y, cache = forward_array(self.params, x)
        try:
            loss = pearson_loss(y, target)
        except ZeroVariance:
            return 1.0, np.zeros(cache.shape)
        _, gx = backward_array(self.params, cache, loss.grad_wrt_prediction, param_grads=False)
        return loss.value, gx


_ARRAY_NAMES = ("conv1_kernel", "conv2_kernel", "conv3_kernel",
                "conv1_bias", "conv2_bias", "conv3_bias", "out_weight", "out_bias")


def save_params(params: MicroNetParams, directory: str | os.PathLike) -> None:
    """Write one NPY per array plus ``manifest.json``.

    NPY files here are limited to four dimensions, so each (3, 3, 3, C_in,
    C_out) kernel is stored as (27, C_in, C_out); the manifest keeps the
    logical shape.
    """
    path = Path(directory)
    path.mkdir(parents=True, exist_ok=True)
    for name, arr in zip(_ARRAY_NAMES, params.arrays()):
        write_npy(path / f"{name}.npy", arr.reshape(27, *arr.shape[3:]) if arr.ndim == 5 else arr)
    manifest = {
        "layers": list(_ARRAY_NAMES),
        "dilations": list(params.dilations),
        "shapes": {n: list(a.shape) for n, a in zip(_ARRAY_NAMES, params.arrays())},
        "height": params.height,
        "width": params.width,
        "input_scale": params.input_scale,
        "pixel_scale": "0-255",
    }
    (path / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def load_params(directory: str | os.PathLike) -> MicroNetParams:
    path = Path(directory)
    manifest = json.loads((path / "manifest.json").read_text())
    arrays = [read_npy(path / f"{name}.npy").astype(np.float64).reshape(manifest["shapes"][name])
              for name in manifest["layers"]]
    return MicroNetParams(arrays[0:3], arrays[3:6], arrays[6], float(arrays[7][0]),
                          manifest["height"], manifest["width"], manifest["input_scale"],
                          tuple(manifest["dilations"]))
