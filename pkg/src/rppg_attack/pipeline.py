"""Full-video inference and spectral heart-rate extraction.

Clip-level predictions are standardized, tapered with a periodic Hann window
and overlap-added. Heart rate comes from a sliding Hamming-windowed,
zero-padded FFT, followed by a centered moving average.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import (
    ConfigError,
    EmptyOverlap,
    HeartRateSeries,
    TooShort,
    VideoClip,
    Waveform,
    ZeroVariance,
    hamming_window,
    hann_window,
    real_fft_magnitude,
    standardize,
)

_HR_CHUNK = 256


@dataclass(frozen=True)
class PipelineConfig:
    clip_len: int = 135
    stride: int | None = None
    hr_window_s: float = 30.0
    hr_stride: int = 1
    smooth_s: float = 5.0
    search_band_bpm: tuple = (30.0, 306.0)
    fft_pad_factor: int = 8

    def __post_init__(self):
        if self.stride is None:
            object.__setattr__(self, "stride", self.clip_len // 2)
        object.__setattr__(self, "search_band_bpm", tuple(float(v) for v in self.search_band_bpm))
        lo, hi = self.search_band_bpm
        if self.clip_len < 2 or not 1 <= self.stride <= self.clip_len:
            raise ConfigError(f"need 1 <= stride <= clip_len, got {self.stride}/{self.clip_len}")
        if not 0 < lo < hi:
            raise ConfigError(f"search band must be positive and increasing, got {self.search_band_bpm}")
        if self.fft_pad_factor < 1 or self.hr_stride < 1:
            raise ConfigError("fft_pad_factor and hr_stride must be >= 1")
        if self.smooth_s < 0:
            raise ConfigError("smooth_s must be non-negative")

    def hr_window(self, fps: float) -> int:
        n = int(round(self.hr_window_s * fps))
        if n < 2:
            raise ConfigError("hr_window_s * fps must be at least 2 samples")
        return n

    def resolution_bpm(self, fps: float) -> float:
        return 60.0 * fps / (self.fft_pad_factor * self.hr_window(fps))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["search_band_bpm"] = list(self.search_band_bpm)
        return d


def window_starts(n_frames: int, clip_len: int, stride: int) -> list[int]:
    """Regular window starts plus one end-aligned tail window if frames remain."""
    if n_frames < clip_len:
        raise TooShort(f"video has {n_frames} frames, clip length is {clip_len}")
    starts = list(range(0, n_frames - clip_len + 1, stride))
    if starts[-1] + clip_len < n_frames:
        starts.append(n_frames - clip_len)
    return starts


def sliding_predict(est, video: VideoClip, cfg: PipelineConfig = PipelineConfig()) -> Waveform:
    """Run ``est`` over clip windows and overlap-add the Hann-tapered outputs."""
    n = video.n_frames
    starts = window_starts(n, cfg.clip_len, cfg.stride)
    taper = hann_window(cfg.clip_len)
    out = np.zeros(n)
    for s in starts:
        pred = est.estimate(video.frames(s, s + cfg.clip_len)).samples
        try:
            pred = standardize(pred)
        except ZeroVariance:
            continue
        out[s:s + cfg.clip_len] += pred * taper
    return Waveform(out, video.fps)


def predict_video(est, video: VideoClip, cfg: PipelineConfig = PipelineConfig()) -> Waveform:
    """Whole-video waveform: clip-wise estimators go through overlap-add,
    whole-trace estimators (CHROM, POS) run once over the full video."""
    if getattr(est, "clip_based", False):
        return sliding_predict(est, video, cfg)
    w = est.estimate(video)
    try:
        return standardize(w)
    except ZeroVariance:
        return Waveform(np.zeros(len(w)), w.fps)


def _peak_bpm(windows: np.ndarray, taper: np.ndarray, pad: int, fps: float, band) -> np.ndarray:
    freqs, mags = real_fft_magnitude(windows * taper, pad, fps)
    bpm = freqs * 60.0
    sel = np.flatnonzero((bpm >= band[0]) & (bpm <= band[1]))
    if sel.size == 0:
        raise ConfigError("search band contains no FFT bin")
    # argmax returns the first maximum, i.e. the lowest frequency on ties
    return bpm[sel[np.argmax(mags[:, sel], axis=1)]]


def spectral_peaks(w: Waveform, cfg: PipelineConfig = PipelineConfig()) -> HeartRateSeries:
    """Per-window peak frequency in bpm, before smoothing."""
    x = w.samples
    win = cfg.hr_window(w.fps)
    if x.size < win:
        raise TooShort(f"need {win} samples for one heart-rate window, got {x.size}")
    views = sliding_window_view(x, win)[:: cfg.hr_stride]
    taper = hamming_window(win)
    pad = cfg.fft_pad_factor * win
    out = np.concatenate([
        _peak_bpm(views[i:i + _HR_CHUNK], taper, pad, w.fps, cfg.search_band_bpm)
        for i in range(0, views.shape[0], _HR_CHUNK)
    ])
    return HeartRateSeries(out, w.fps / cfg.hr_stride)


def moving_average(hr: HeartRateSeries, smooth_s: float) -> HeartRateSeries:
    """Centered boxcar of ``smooth_s`` seconds, truncated at the edges."""
    x = hr.bpm
    width = max(1, int(round(smooth_s * hr.fps)))
    if width == 1:
        return HeartRateSeries(x.copy(), hr.fps)
    n = x.size
    half = width // 2
    idx = np.arange(n)
    lo = np.clip(idx - half, 0, n)
    hi = np.clip(idx - half + width, 0, n)
    csum = np.concatenate(([0.0], np.cumsum(x)))
    avg = (csum[hi] - csum[lo]) / (hi - lo)
    # cumsum rounding can leave a mean one ulp outside the data range
    return HeartRateSeries(np.clip(avg, x.min(), x.max()), hr.fps)


def extract_heart_rate(w: Waveform, cfg: PipelineConfig = PipelineConfig()) -> HeartRateSeries:
    """Sliding-window spectral heart rate followed by the moving average."""
    return moving_average(spectral_peaks(w, cfg), cfg.smooth_s)


def align_series(a, b):
    """Truncate both series (HeartRateSeries or arrays) to their common
    length, counted from the start."""
    if isinstance(a, HeartRateSeries) and isinstance(b, HeartRateSeries) and a.fps != b.fps:
        raise ValueError(f"series sample rates differ: {a.fps} vs {b.fps}")
    xa = a.bpm if isinstance(a, HeartRateSeries) else np.asarray(a, dtype=float).reshape(-1)
    xb = b.bpm if isinstance(b, HeartRateSeries) else np.asarray(b, dtype=float).reshape(-1)
    n = min(xa.size, xb.size)
    if n == 0:
        raise EmptyOverlap("series have no overlap")
    return xa[:n].copy(), xb[:n].copy()
