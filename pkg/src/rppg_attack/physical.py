"""Simulated LED attack: spatially uniform additive light whose strength
falls off with the inverse square of the LED-to-face distance."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from .attack import AttackLine, general_attack
from .core import ConfigError, PerturbationTensor, ShapeMismatch, VideoClip
from .evaluation import MetricReport, make_report, success_rate, truth_hr
from .pipeline import (PipelineConfig, align_series, extract_heart_rate, predict_video,
                       window_starts)
from .synth import SceneConfig, generate_clip, make_mask_medium

log = logging.getLogger(__name__)

PHYSICAL_TARGETS_BPM = (40.0, 120.0, 200.0, 300.0)


@dataclass(frozen=True)
class LedModel:
    """``gain(t) = reference_gain * (d0 / d(t))**2``.

    ``distance_profile`` is a scalar or one distance per frame.
    """

    reference_gain: float = 1.0
    distance_profile: object = 1.0
    d0: float = 1.0

    def __post_init__(self):
        d = np.array(self.distance_profile, dtype=np.float64).reshape(-1)
        if d.size == 0 or not np.all(np.isfinite(d)) or np.any(d <= 0):
            raise ConfigError("LED distances must be positive and finite")
        if not self.d0 > 0 or not np.isfinite(self.d0):
            raise ConfigError("reference distance d0 must be positive")
        if not np.isfinite(self.reference_gain) or self.reference_gain < 0:
            raise ConfigError("reference_gain must be finite and non-negative")
        d.flags.writeable = False
        object.__setattr__(self, "distance_profile", d)
        if not np.all(np.isfinite(self.reference_gain * (self.d0 / d) ** 2)):
            raise ConfigError("LED gain overflows")

    def gain(self, n_frames: int) -> np.ndarray:
        d = self.distance_profile
        if d.size == 1:
            d = np.full(n_frames, d[0])
        elif d.size != n_frames:
            raise ShapeMismatch(f"distance profile has {d.size} entries for {n_frames} frames")
        return self.reference_gain * (self.d0 / d) ** 2

    def at_distance(self, distance: float) -> "LedModel":
        return dataclasses.replace(self, distance_profile=float(distance))

    def to_dict(self) -> dict:
        d = self.distance_profile
        return {"reference_gain": self.reference_gain, "d0": self.d0,
                "distance_profile": float(d[0]) if d.size == 1 else d.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "LedModel":
        unknown = set(d) - {"reference_gain", "distance_profile", "d0"}
        if unknown:
            raise ConfigError(f"unknown LED keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class LedExposure:
    """An LED-lit clip plus how much of it saturated."""

    clip: VideoClip
    clamped_values: int
    clamped_fraction: float


def simulate_led(clip: VideoClip, offsets, led: LedModel) -> LedExposure:
    """Add ``gain(t) * offsets[t]`` to every pixel of frame ``t``, clamping
    to [0, 255]. Clamped values are counted, never raised."""
    off = offsets.data if isinstance(offsets, PerturbationTensor) else np.asarray(offsets, dtype=float)
    if off.shape != (clip.n_frames, 3):
        raise ShapeMismatch(f"LED offsets must be ({clip.n_frames}, 3), got {off.shape}")
    if np.any(off < 0):
        raise ConfigError("LED offsets must be non-negative: light can only be added")
    light = led.gain(clip.n_frames)[:, None] * off
    lit = clip.data + light[:, None, None, :]
    over = (lit > 255.0) | (lit < 0.0)
    n_clamped = int(np.count_nonzero(over))
    if n_clamped:
        log.info("LED saturated %d of %d values", n_clamped, over.size)
    return LedExposure(VideoClip(np.clip(lit, 0.0, 255.0), clip.fps), n_clamped, n_clamped / over.size)


@dataclass
class DistanceSweep:
    distances: list
    success_rates: list
    clamped_fractions: list
    threshold_distance: float | None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def run_distance_sweep(model, clip: VideoClip, truth, offsets, distances, led: LedModel,
                       target_bpm: float, pcfg: PipelineConfig = PipelineConfig()) -> DistanceSweep:
    """Attack success against ground truth with the LED at each distance.

    The threshold is the first distance, walking from far to near as when
    the LED is brought towards the face, whose success rate exceeds 50%.
    """
    distances = [float(d) for d in distances]
    if len(distances) < 2:
        raise ConfigError("a distance sweep needs at least two distances")
    y = truth_hr(truth, pcfg) if hasattr(truth, "bvp") else np.asarray(truth, dtype=float)
    rates, clamped = [], []
    for d in distances:
        lit = simulate_led(clip, offsets, led.at_distance(d))
        p, yy = align_series(extract_heart_rate(predict_video(model, lit.clip, pcfg), pcfg).bpm, y)
        rates.append(success_rate(p, yy, target_bpm))
        clamped.append(lit.clamped_fraction)
    threshold = None
    for d, r in sorted(zip(distances, rates), key=lambda dr: -dr[0]):
        if r > 50.0:
            threshold = d
            break
    return DistanceSweep(distances, rates, clamped, threshold)


def output_amplitude(model, clip: VideoClip, pcfg: PipelineConfig = PipelineConfig()) -> float:
    """Mean standard deviation of the raw per-window model output."""
    sds = [model.estimate(clip.frames(s, s + pcfg.clip_len)).samples.std()
           for s in window_starts(clip.n_frames, pcfg.clip_len, pcfg.stride)]
    return float(np.mean(sds))


@dataclass
class PhysicalScenario:
    reports: list
    clamped_fraction: dict
    mask_amplitude: dict = field(default_factory=dict)
    live_amplitude: dict = field(default_factory=dict)

    def get(self, scenario: str, estimator: str, constraints: str, target_bpm=None) -> MetricReport:
        for r in self.reports:
            if (r.scenario, r.estimator, r.constraints, r.target_bpm) == (
                    scenario, estimator, constraints, None if target_bpm is None else float(target_bpm)):
                return r
        raise KeyError((scenario, estimator, constraints, target_bpm))

    def summary(self) -> dict:
        return {"clamped_fraction": self.clamped_fraction, "mask_amplitude": self.mask_amplitude,
                "live_amplitude": self.live_amplitude}


def run_physical_scenario(subjects, line: AttackLine, led: LedModel, estimators,
                          targets=PHYSICAL_TARGETS_BPM, *, mask: SceneConfig | None = None,
                          epsilon: float = 1.0, amplitude_model=None,
                          pcfg: PipelineConfig = PipelineConfig()) -> PhysicalScenario:
    """Light each subject with the general-attack orbit at every target.

    Per subject there is one control video and one attacked video per
    target; every estimator scores each. Frames are pooled over subjects
    per (estimator, condition). With ``mask``, a pulse-free medium is lit
    at each target and scored by the mask success rate; the raw output
    amplitude of ``amplitude_model`` on mask and live media is recorded.
    """
    subjects = list(subjects)
    if not subjects:
        raise ConfigError("the physical scenario needs at least one subject")
    estimators = list(estimators)
    videos = [generate_clip(cfg) for cfg in subjects]
    truths = [truth_hr(gt, pcfg) for _, gt in videos]
    first = videos[0][0]
    for clip, _ in videos[1:]:
        if clip.n_frames != first.n_frames or clip.fps != first.fps:
            raise ConfigError("all subjects must share duration and fps")
    # the orbit ignores the subject, so one set of offsets serves everyone
    offsets = {t: general_attack(line, t, first.n_frames, first.fps, epsilon=epsilon, nonnegative=True)
               for t in targets}

    conditions = [None, *targets]
    lit = {}
    clamped = {}
    for t in conditions:
        if t is None:
            lit[t] = [clip for clip, _ in videos]
            continue
        exposures = [simulate_led(clip, offsets[t], led) for clip, _ in videos]
        lit[t] = [e.clip for e in exposures]
        clamped[str(float(t))] = float(np.mean([e.clamped_fraction for e in exposures]))

    reports = []
    for est in estimators:
        for t in conditions:
            preds, refs = [], []
            for clip, y in zip(lit[t], truths):
                p, yy = align_series(extract_heart_rate(predict_video(est, clip, pcfg), pcfg).bpm, y)
                preds.append(p)
                refs.append(yy)
            reports.append(make_report(np.concatenate(preds), np.concatenate(refs), t,
                                       scenario="physical-live", estimator=est.name,
                                       constraints="control" if t is None else "LED"))

    result = PhysicalScenario(reports, clamped)
    if mask is not None:
        mclip, _ = make_mask_medium(mask)
        if mclip.n_frames != first.n_frames:
            raise ConfigError("mask medium must match the subjects' duration")
        for t in targets:
            exposure = simulate_led(mclip, offsets[t], led)
            for est in estimators:
                hr = extract_heart_rate(predict_video(est, exposure.clip, pcfg), pcfg).bpm
                reports.append(make_report(hr, None, t, scenario="physical-mask",
                                           estimator=est.name, constraints="LED"))
            if amplitude_model is not None:
                key = str(float(t))
                result.mask_amplitude[key] = output_amplitude(amplitude_model, exposure.clip, pcfg)
                result.live_amplitude[key] = float(np.mean(
                    [output_amplitude(amplitude_model, c, pcfg) for c in lit[t]]))
    return result
