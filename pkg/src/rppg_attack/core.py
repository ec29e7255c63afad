"""Domain types and the small signal primitives every other module leans on.

Pixels live on the [0, 255] scale throughout; nothing here clamps.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class RppgError(Exception):
    """Base class for every error raised by this package."""


class ZeroVariance(RppgError, ValueError):
    pass


class InvalidLength(RppgError, ValueError):
    pass


class FormatError(RppgError, ValueError):
    pass


class ConfigError(RppgError, ValueError):
    pass


class DegenerateInput(RppgError, ValueError):
    pass


class ShapeMismatch(RppgError, ValueError):
    pass


class TooShort(RppgError, ValueError):
    pass


class EmptyOverlap(RppgError, ValueError):
    pass


class EmptyInput(RppgError, ValueError):
    pass


class DegenerateCloud(RppgError, ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class VideoClip:
    """Frame volume of shape (frames, rows, columns, 3), RGB order."""

    data: np.ndarray
    fps: float

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 4 or data.shape[3] != 3:
            raise ShapeMismatch(f"expected (N, H, W, 3) clip, got shape {data.shape}")
        if min(data.shape) < 1:
            raise ShapeMismatch(f"empty clip dimension in {data.shape}")
        if not self.fps > 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        if not np.all(np.isfinite(data)):
            raise ValueError("clip contains non-finite pixels")
        if data.min() < 0.0 or data.max() > 255.0:
            raise ValueError("clip pixels must lie in [0, 255]")
        object.__setattr__(self, "data", _frozen(data))
        object.__setattr__(self, "fps", float(self.fps))

    @property
    def n_frames(self) -> int:
        return self.data.shape[0]

    @property
    def shape(self) -> tuple:
        return self.data.shape

    def frames(self, start: int, stop: int) -> "VideoClip":
        return VideoClip(self.data[start:stop], self.fps)

    def mean_rgb(self) -> np.ndarray:
        """Spatial mean trace, shape (frames, 3)."""
        return self.data.mean(axis=(1, 2))


@dataclass(frozen=True)
class Waveform:
    samples: np.ndarray
    fps: float

    def __post_init__(self):
        s = np.array(self.samples, dtype=np.float64).reshape(-1)
        if s.size < 1:
            raise InvalidLength("waveform must have at least one sample")
        if not np.all(np.isfinite(s)):
            raise ValueError("waveform contains non-finite samples")
        if not self.fps > 0:
            raise ConfigError(f"fps must be positive, got {self.fps}")
        object.__setattr__(self, "samples", _frozen(s))
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self) -> int:
        return self.samples.size


@dataclass(frozen=True)
class HeartRateSeries:
    bpm: np.ndarray
    fps: float

    def __post_init__(self):
        b = np.array(self.bpm, dtype=np.float64).reshape(-1)
        if b.size < 1:
            raise InvalidLength("heart-rate series must be non-empty")
        object.__setattr__(self, "bpm", _frozen(b))
        object.__setattr__(self, "fps", float(self.fps))

    def __len__(self) -> int:
        return self.bpm.size


@dataclass(frozen=True)
class PerturbationTensor:
    """Additive perturbation; (N, H, W, 3) or (N, 3) when spatially uniform."""

    data: np.ndarray
    epsilon: float = field(default=np.inf)

    def __post_init__(self):
        d = np.array(self.data, dtype=np.float64)
        if d.ndim not in (2, 4) or d.shape[-1] != 3:
            raise ShapeMismatch(f"perturbation must be (N, 3) or (N, H, W, 3), got {d.shape}")
        if np.abs(d).max(initial=0.0) > self.epsilon:
            raise ValueError("perturbation exceeds its epsilon bound")
        object.__setattr__(self, "data", _frozen(d))

    @property
    def spatially_uniform(self) -> bool:
        return self.data.ndim == 2

    def as_volume(self, shape) -> np.ndarray:
        """Broadcast to a full (N, H, W, 3) volume."""
        if self.spatially_uniform:
            return np.broadcast_to(self.data[:, None, None, :], shape)
        if self.data.shape != tuple(shape):
            raise ShapeMismatch(f"perturbation {self.data.shape} does not match clip {tuple(shape)}")
        return self.data


def standardize(w):
    """Zero-mean, unit population-std copy of ``w`` (a Waveform or 1-D array).

    Raises ZeroVariance for windows whose standard deviation is below 1e-12.
    """
    x = w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)
    if x.size < 2:
        raise InvalidLength("standardize needs at least two samples")
    mu = x.mean()
    sd = x.std()
    if sd < 1e-12:
        raise ZeroVariance("constant window has no variance")
    z = (x - mu) / sd
    return Waveform(z, w.fps) if isinstance(w, Waveform) else z


def hann_window(n: int) -> np.ndarray:
    """Periodic Hann window, 0.5 * (1 - cos(2 pi k / n))."""
    if n < 2:
        raise InvalidLength(f"window length must be >= 2, got {n}")
    k = np.arange(n)
    return 0.5 * (1.0 - np.cos(2.0 * np.pi * k / n))


def hamming_window(n: int) -> np.ndarray:
    """Symmetric Hamming window, 0.54 - 0.46 * cos(2 pi k / (n - 1))."""
    if n < 2:
        raise InvalidLength(f"window length must be >= 2, got {n}")
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2.0 * np.pi * k / (n - 1))


def real_fft_magnitude(x, pad_to: int, fps: float = 1.0):
    """One-sided magnitude spectrum of ``x`` zero-padded to ``pad_to`` samples.

    Works along the last axis, so a stack of windows can be passed at once.
    Returns ``(freqs, mags)`` with ``freqs[k] = k * fps / pad_to``.
    """
    x = np.asarray(x, dtype=np.float64)
    if pad_to < x.shape[-1]:
        raise InvalidLength(f"pad_to={pad_to} is shorter than the signal ({x.shape[-1]})")
    mags = np.abs(np.fft.rfft(x, n=pad_to, axis=-1))
    freqs = np.arange(pad_to // 2 + 1) * (fps / pad_to)
    return freqs, mags
