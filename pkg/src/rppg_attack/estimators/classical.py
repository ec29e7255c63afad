"""Colour-projection pulse estimators: CHROM and POS."""
from __future__ import annotations

import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from ..core import DegenerateInput, TooShort, VideoClip, Waveform

CHROM_BAND_BPM = (42.0, 240.0)
CHROM_FILTER_ORDER = 4
POS_WINDOW_S = 1.6


def _normalized_trace(clip: VideoClip) -> np.ndarray:
    rgb = clip.mean_rgb()
    mu = rgb.mean(axis=0)
    if np.any(mu < 1e-9):
        raise DegenerateInput(f"channel mean too small for temporal normalization: {mu}")
    return rgb / mu


def chrom_bandpass(x: np.ndarray, fps: float) -> np.ndarray:
    """Zero-phase Butterworth band-pass over 42-240 bpm."""
    lo, hi = (b / 60.0 for b in CHROM_BAND_BPM)
    sos = signal.butter(CHROM_FILTER_ORDER, [lo, hi], btype="bandpass", fs=fps, output="sos")
    return signal.sosfiltfilt(sos, x, axis=0)


def chrom_estimate(clip: VideoClip) -> Waveform:
    if clip.n_frames < 64:
        raise TooShort(f"CHROM needs at least 64 frames, got {clip.n_frames}")
    cn = _normalized_trace(clip)
    r, g, b = cn[:, 0], cn[:, 1], cn[:, 2]
    xs = 3.0 * r - 2.0 * g
    ys = 1.5 * r + g - 1.5 * b
    xf = chrom_bandpass(xs, clip.fps)
    yf = chrom_bandpass(ys, clip.fps)
    sy = yf.std()
    alpha = xf.std() / sy if sy >= 1e-12 else 0.0
    return Waveform(xf - alpha * yf, clip.fps)


def pos_estimate(clip: VideoClip) -> Waveform:
    if clip.n_frames < 48:
        raise TooShort(f"POS needs at least 48 frames, got {clip.n_frames}")
    l = math.ceil(POS_WINDOW_S * clip.fps)
    if clip.n_frames < l:
        raise TooShort(f"POS window is {l} frames but the clip has {clip.n_frames}")
    rgb = clip.mean_rgb()
    if np.any(rgb.mean(axis=0) < 1e-9):
        raise DegenerateInput("channel mean too small for temporal normalization")

    win = sliding_window_view(rgb, l, axis=0)  # (M, 3, l)
    mu = win.mean(axis=2, keepdims=True)
    if np.any(mu < 1e-9):
        raise DegenerateInput("window channel mean too small for temporal normalization")
    cn = win / mu
    s1 = cn[:, 1] - cn[:, 2]
    s2 = cn[:, 1] + cn[:, 2] - 2.0 * cn[:, 0]
    sd2 = s2.std(axis=1)
    ok = sd2 >= 1e-12
    ratio = np.zeros_like(sd2)
    ratio[ok] = s1[ok].std(axis=1) / sd2[ok]
    h = s1 + ratio[:, None] * s2
    h -= h.mean(axis=1, keepdims=True)

    out = np.zeros(clip.n_frames)
    m = h.shape[0]
    for k in range(l):
        out[k:k + m] += h[:, k]
    return Waveform(out, clip.fps)


class Chrom:
    name = "chrom"
    clip_based = False

    def estimate(self, clip: VideoClip) -> Waveform:
        return chrom_estimate(clip)


class Pos:
    name = "pos"
    clip_based = False

    def estimate(self, clip: VideoClip) -> Waveform:
        return pos_estimate(clip)
