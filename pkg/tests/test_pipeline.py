import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra import numpy as hnp

from rppg_attack.core import (ConfigError, EmptyOverlap, HeartRateSeries, TooShort, VideoClip,
                              Waveform, standardize)
from rppg_attack.pipeline import (PipelineConfig, align_series, extract_heart_rate,
                                  moving_average, predict_video, sliding_predict, spectral_peaks,
                                  window_starts)

FPS = 30.0


class GlobalSine:
    """Estimator that returns a slice of one global sinusoid."""

    clip_based = True

    def __init__(self, hz, total, fps=FPS):
        self.sig = np.sin(2 * np.pi * hz * np.arange(total) / fps)
        self.start = 0

    def estimate(self, clip):
        # the clip's first pixel value carries its start frame
        s = int(round(clip.data[0, 0, 0, 0]))
        return Waveform(self.sig[s:s + clip.n_frames], clip.fps)


def index_video(n):
    data = np.zeros((n, 1, 1, 3))
    data[:, 0, 0, 0] = np.arange(n) % 256
    return VideoClip(data, FPS)


class Constant:
    clip_based = True

    def estimate(self, clip):
        return Waveform(np.ones(clip.n_frames), clip.fps)


def test_config_defaults_and_validation():
    cfg = PipelineConfig()
    assert cfg.stride == 67 and cfg.search_band_bpm == (30.0, 306.0)
    assert cfg.resolution_bpm(30.0) == 0.25
    with pytest.raises(ConfigError):
        PipelineConfig(clip_len=10, stride=11)
    with pytest.raises(ConfigError):
        PipelineConfig(search_band_bpm=(100, 50))
    with pytest.raises(ConfigError):
        PipelineConfig(fft_pad_factor=0)
    with pytest.raises(ConfigError):
        PipelineConfig(hr_window_s=0.01).hr_window(30.0)


@given(st.integers(10, 2000), st.integers(2, 300), st.data())
def test_window_starts_cover_video(n, clip_len, data):
    stride = data.draw(st.integers(1, clip_len))
    if n < clip_len:
        with pytest.raises(TooShort):
            window_starts(n, clip_len, stride)
        return
    starts = window_starts(n, clip_len, stride)
    assert starts[0] == 0 and starts[-1] + clip_len == n
    covered = np.zeros(n, bool)
    for s in starts:
        covered[s:s + clip_len] = True
    assert covered.all()
    assert all(b > a for a, b in zip(starts, starts[1:]))


def test_single_window_is_standardized_times_hann():
    n = 135
    est = GlobalSine(1.3, n)
    out = sliding_predict(est, index_video(n))
    expect = standardize(est.sig[:n]) * (0.5 * (1 - np.cos(2 * np.pi * np.arange(n) / n)))
    np.testing.assert_allclose(out.samples, expect, atol=1e-12)


@pytest.mark.parametrize("bpm", [50.0, 72.0, 80.0, 100.0, 120.0, 180.0])
def test_cola_reconstruction(bpm):
    # four clips at the default half-clip stride: the interior follows the global sine
    cfg = PipelineConfig()
    n = cfg.clip_len + 3 * cfg.stride
    est = GlobalSine(bpm / 60.0, n)
    out = sliding_predict(est, index_video(n), cfg).samples
    interior = slice(cfg.stride, n - cfg.stride)
    rho = np.corrcoef(out[interior], est.sig[interior])[0, 1]
    assert rho >= 0.999


def test_constant_estimator_gives_zeros():
    out = sliding_predict(Constant(), index_video(300))
    assert np.all(out.samples == 0)
    assert len(out) == 300


def test_too_short_video():
    with pytest.raises(TooShort):
        sliding_predict(Constant(), index_video(100))


def sine(bpm, seconds=60.0, amp=1.0):
    t = np.arange(int(seconds * FPS)) / FPS
    return amp * np.sin(2 * np.pi * bpm / 60 * t)


def test_exact_bin_sine_is_bit_equal():
    hr = extract_heart_rate(Waveform(sine(72.0), FPS))
    assert np.all(hr.bpm == 72.0)
    raw = spectral_peaks(Waveform(sine(72.0), FPS))
    assert len(np.unique(raw.bpm)) == 1
    assert len(hr) == 1800 - 900 + 1


def test_dominant_peak_wins():
    w = Waveform(sine(60.0) + sine(120.0, amp=0.5), FPS)
    assert np.all(extract_heart_rate(w).bpm == 60.0)


def test_chirp_monotone():
    t = np.arange(int(120 * FPS)) / FPS
    f0, f1 = 1.0, 1.5
    phase = 2 * np.pi * (f0 * t + (f1 - f0) * t ** 2 / (2 * 120))
    hr = extract_heart_rate(Waveform(np.sin(phase), FPS)).bpm
    res = PipelineConfig().resolution_bpm(FPS)
    assert np.all(np.diff(hr) >= -res)
    assert hr[-1] > hr[0] + 20


@settings(max_examples=25)
@given(hnp.arrays(np.float64, 960, elements=st.floats(-5, 5)))
def test_hr_inside_band(x):
    hr = spectral_peaks(Waveform(x, FPS)).bpm
    assert np.all((hr >= 30.0) & (hr <= 306.0))


def test_ties_go_low():
    # all-zero input: every bin ties, so the lowest in-band bin is reported
    hr = spectral_peaks(Waveform(np.zeros(900), FPS)).bpm
    assert hr[0] == 30.0


def test_hr_too_short():
    with pytest.raises(TooShort):
        extract_heart_rate(Waveform(np.zeros(899), FPS))


def test_moving_average_examples():
    const = HeartRateSeries(np.full(50, 71.3), FPS)
    assert np.all(moving_average(const, 5.0).bpm == 71.3)
    x = np.zeros(1001)
    x[500] = 150.0
    out = moving_average(HeartRateSeries(x, FPS), 5.0).bpm
    assert np.isclose(out[500], 1.0) and np.isclose(out.max(), 1.0)
    assert np.count_nonzero(out > 0) == 150


def _ma_oracle(x, width):
    n = len(x)
    half = width // 2
    out = np.empty(n)
    for i in range(n):
        lo, hi = max(0, i - half), min(n, i - half + width)
        out[i] = sum(x[lo:hi]) / (hi - lo)
    return out


@given(hnp.arrays(np.float64, st.integers(1, 300), elements=st.floats(30, 306)),
       st.floats(0, 3))
def test_moving_average_matches_loop_and_bounds(x, smooth):
    out = moving_average(HeartRateSeries(x, FPS), smooth).bpm
    width = max(1, int(round(smooth * FPS)))
    np.testing.assert_allclose(out, _ma_oracle(x, width), rtol=1e-12, atol=1e-9)
    assert out.min() >= x.min() and out.max() <= x.max()


def test_align_series():
    a = HeartRateSeries(np.arange(100.0) + 30, FPS)
    b = HeartRateSeries(np.arange(90.0) + 30, FPS)
    x, y = align_series(a, b)
    assert len(x) == len(y) == 90
    x, y = align_series(a, a)
    assert len(x) == 100
    with pytest.raises(EmptyOverlap):
        align_series(np.zeros(0), np.zeros(3))
    with pytest.raises(ValueError):
        align_series(a, HeartRateSeries(np.arange(5.0) + 30, 15.0))


def test_predict_video_whole_trace_estimator():
    class Whole:
        clip_based = False

        def estimate(self, clip):
            return Waveform(np.arange(clip.n_frames, dtype=float), clip.fps)

    out = predict_video(Whole(), index_video(50))
    assert abs(out.samples.mean()) < 1e-12 and abs(out.samples.std() - 1) < 1e-12

    class Flat:
        clip_based = False

        def estimate(self, clip):
            return Waveform(np.ones(clip.n_frames), clip.fps)

    assert np.all(predict_video(Flat(), index_video(50)).samples == 0)
