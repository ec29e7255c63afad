"""Synthetic pre-cropped face clips with a known blood-volume pulse.

Each frame is a flat skin colour, plus a pulse that modulates the colour
along ``pulse_direction`` under a smooth skin mask, plus a slow illumination
drift, plus i.i.d. Gaussian sensor noise.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import ConfigError, HeartRateSeries, VideoClip, Waveform

DRIFT_HZ = 0.05


def _default_direction() -> tuple:
    d = np.array([0.37, 0.81, 0.45])
    return tuple(-d / np.linalg.norm(d))


@dataclass(frozen=True)
class SceneConfig:
    fps: float = 30.0
    duration_s: float = 60.0
    height: int = 8
    width: int = 8
    heart_rate_bpm: float = 72.0
    pulse_amplitude: float = 0.5
    pulse_direction: tuple = field(default_factory=_default_direction)
    base_color: tuple = (170.0, 120.0, 100.0)
    illumination_drift_amp: float = 1.0
    sensor_noise_std: float = 0.5
    motion_jitter_std: float = 0.0
    seed: int = 0
    has_pulse: bool = True

    @property
    def n_frames(self) -> int:
        return int(round(self.fps * self.duration_s))

    def validate(self) -> None:
        if not self.fps > 0 or not self.duration_s > 0:
            raise ConfigError("fps and duration_s must be positive")
        if self.n_frames < 1 or self.height < 1 or self.width < 1:
            raise ConfigError("clip must have at least one frame and pixel")
        if not 30.0 <= self.heart_rate_bpm <= 300.0:
            raise ConfigError(f"heart_rate_bpm {self.heart_rate_bpm} outside [30, 300]")
        if self.pulse_amplitude < 0 or self.sensor_noise_std < 0 or self.illumination_drift_amp < 0:
            raise ConfigError("amplitudes and noise levels must be non-negative")
        if self.motion_jitter_std < 0:
            raise ConfigError("motion_jitter_std must be non-negative")
        d = np.asarray(self.pulse_direction, dtype=float)
        if d.shape != (3,) or abs(np.linalg.norm(d) - 1.0) > 1e-6:
            raise ConfigError("pulse_direction must be a unit 3-vector")
        base = np.asarray(self.base_color, dtype=float)
        if base.shape != (3,) or base.min() <= 0:
            raise ConfigError("base_color must be three positive values")
        # bvp peaks at about 1.17, round up to 1.25
        swing = 1.25 * self.pulse_amplitude * np.abs(d) + self.illumination_drift_amp * base / base.mean()
        margin = 3.0 * self.sensor_noise_std
        if np.any(base - swing < margin) or np.any(base + swing > 255.0 - margin):
            raise ConfigError("base_color plus modulation leaves the [0, 255] range margin")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["pulse_direction"] = list(self.pulse_direction)
        d["base_color"] = list(self.base_color)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SceneConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown scene keys: {sorted(unknown)}")
        d = dict(d)
        for key in ("pulse_direction", "base_color"):
            if key in d:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)


@dataclass(frozen=True)
class GroundTruth:
    bvp: Optional[Waveform]
    hr: Optional[HeartRateSeries]
    config: SceneConfig


def bvp_waveform(bpm: float, n_frames: int, fps: float) -> np.ndarray:
    """Fundamental plus a quarter-amplitude second harmonic."""
    t = np.arange(n_frames) / fps
    f = bpm / 60.0
    return np.sin(2 * np.pi * f * t) + 0.25 * np.sin(4 * np.pi * f * t)


def skin_mask(height: int, width: int) -> np.ndarray:
    """Smooth super-Gaussian face weighting in [0, 1]; above 0.5 on about two
    thirds of the frame (62.5% at 8x8, 65% at 64x64)."""
    v = (np.arange(height) + 0.5) / height * 2 - 1
    u = (np.arange(width) + 0.5) / width * 2 - 1
    r2 = (u[None, :] / 0.95) ** 2 + (v[:, None] / 1.05) ** 2
    return np.exp(-(r2**2))


def _render(cfg: SceneConfig, pulse_amplitude: float):
    rng = np.random.default_rng(cfg.seed)
    n, h, w = cfg.n_frames, cfg.height, cfg.width
    base = np.asarray(cfg.base_color, dtype=float)
    direction = np.asarray(cfg.pulse_direction, dtype=float)
    t = np.arange(n) / cfg.fps

    bvp = bvp_waveform(cfg.heart_rate_bpm, n, cfg.fps)
    drift_phase = rng.uniform(0, 2 * np.pi)
    drift = cfg.illumination_drift_amp * np.sin(2 * np.pi * DRIFT_HZ * t + drift_phase)

    mask = skin_mask(h, w)
    if cfg.motion_jitter_std > 0:
        shifts = np.rint(rng.normal(0.0, cfg.motion_jitter_std, size=(n, 2))).astype(int)
        masks = np.stack([np.roll(mask, tuple(s), axis=(0, 1)) for s in shifts])
    else:
        masks = np.broadcast_to(mask, (n, h, w))

    frames = np.empty((n, h, w, 3))
    frames[:] = base
    frames += (pulse_amplitude * bvp)[:, None, None, None] * masks[..., None] * direction
    frames += drift[:, None, None, None] * (base / base.mean())
    if cfg.sensor_noise_std > 0:
        frames += rng.normal(0.0, cfg.sensor_noise_std, size=frames.shape)
    np.clip(frames, 0.0, 255.0, out=frames)
    return VideoClip(frames, cfg.fps), bvp


def generate_clip(cfg: SceneConfig):
    """Render one clip and its ground truth. Deterministic in ``cfg.seed``."""
    cfg.validate()
    clip, bvp = _render(cfg, cfg.pulse_amplitude if cfg.has_pulse else 0.0)
    if not cfg.has_pulse:
        return clip, GroundTruth(None, None, cfg)
    hr = HeartRateSeries(np.full(cfg.n_frames, float(cfg.heart_rate_bpm)), cfg.fps)
    return clip, GroundTruth(Waveform(bvp, cfg.fps), hr, cfg)


def generate_dataset(cfgs):
    """Render every config, item ``i`` seeded with ``cfg.seed + i``."""
    cfgs = list(cfgs)
    if not cfgs:
        raise ConfigError("generate_dataset needs at least one scene config")
    return [generate_clip(dataclasses.replace(c, seed=c.seed + i)) for i, c in enumerate(cfgs)]


def make_mask_medium(cfg: SceneConfig):
    """Pulse-free face surrogate: same nuisances, no blood-volume signal."""
    if cfg.has_pulse:
        raise ConfigError("mask media require has_pulse=False")
    return generate_clip(dataclasses.replace(cfg, pulse_amplitude=0.0))


def random_scenes(n: int, seed: int, duration_s: float, *, hr_range=(40.0, 180.0),
                  amplitude_range=(0.3, 0.8), noise_range=(0.3, 1.0), drift_range=(0.0, 2.0),
                  height: int = 8, width: int = 8, fps: float = 30.0) -> list:
    """``n`` scene configs with heart rate and nuisance levels drawn
    uniformly from the given ranges; scene ``i`` gets seed ``seed + i``."""
    if n < 1:
        raise ConfigError("need at least one scene")
    rng = np.random.default_rng(seed)
    out = []
    for i in range(n):
        out.append(SceneConfig(
            fps=fps, duration_s=duration_s, height=height, width=width,
            heart_rate_bpm=float(rng.uniform(*hr_range)),
            pulse_amplitude=float(rng.uniform(*amplitude_range)),
            sensor_noise_std=float(rng.uniform(*noise_range)),
            illumination_drift_amp=float(rng.uniform(*drift_range)),
            seed=seed + i,
        ))
    return out
