"""Targeted gradient-sign attacks on pulse estimators.

``c_mi_fgsm`` is momentum iterative FGSM with three optional physical
constraints:

* temporal (T): the gradient is averaged over rows and columns, so the
  perturbation is one RGB offset per frame, as a uniform light source makes;
* nonnegative (NN): the momentum is clipped to be nonpositive, so the
  sign-descent step only ever adds light;
* general (G): no iterations at all. A sinusoid at the target rate is
  projected onto a line fitted in RGB space to earlier T+NN perturbations,
  which needs neither the subject's pulse nor its phase.

Models must provide ``loss_and_input_grad(x, target) -> (loss, grad)``.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .core import (ConfigError, DegenerateCloud, PerturbationTensor, ShapeMismatch,
                   VideoClip, Waveform)
from .pipeline import PipelineConfig, window_starts

VANISHED_L1 = 1e-20
COMBOS = ("none", "T", "T+G", "T+NN", "T+G+NN")


@dataclass(frozen=True)
class AttackConfig:
    epsilon: float = 1.0
    iterations: int = 50
    decay: float = 0.9
    beta: float | None = None
    temporal: bool = False
    nonnegative: bool = False
    general: bool = False
    target_bpm: float = 120.0
    phase: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.iterations < 1:
            raise ConfigError("iterations must be >= 1")
        if not 0.0 <= self.decay <= 1.0:
            raise ConfigError("decay must lie in [0, 1]")
        if self.general and not self.temporal:
            raise ConfigError("the general attack is spatially uniform; it requires temporal=True")
        if not self.target_bpm > 0:
            raise ConfigError("target_bpm must be positive")

    @property
    def step(self) -> float:
        return self.epsilon / self.iterations

    @property
    def constraints(self) -> str:
        parts = [p for p, on in (("T", self.temporal), ("G", self.general),
                                 ("NN", self.nonnegative)) if on]
        return "+".join(parts) if parts else "none"

    @classmethod
    def from_constraints(cls, label: str, **kwargs) -> "AttackConfig":
        flags = set() if label == "none" else set(label.split("+"))
        if not flags <= {"T", "G", "NN"}:
            raise ConfigError(f"unknown constraint label {label!r}")
        return cls(temporal="T" in flags, general="G" in flags, nonnegative="NN" in flags, **kwargs)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "AttackConfig":
        d = dict(d)
        if "constraints" in d:
            label = d.pop("constraints")
            if isinstance(label, dict):
                d.update({k: bool(v) for k, v in label.items()})
            else:
                return cls.from_constraints(label, **d)
        d.pop("step", None)
        return cls(**d)


@dataclass(frozen=True)
class AttackLine:
    mean: np.ndarray
    direction: np.ndarray
    half_extent: float

    def __post_init__(self):
        m = np.asarray(self.mean, dtype=float).reshape(3)
        d = np.asarray(self.direction, dtype=float).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-9:
            raise ConfigError("attack line direction must have unit norm")
        if not self.half_extent > 0:
            raise ConfigError("attack line half_extent must be positive")
        object.__setattr__(self, "mean", m)
        object.__setattr__(self, "direction", d)
        object.__setattr__(self, "half_extent", float(self.half_extent))

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "direction": self.direction.tolist(),
                "half_extent": self.half_extent}

    @classmethod
    def from_dict(cls, d: dict) -> "AttackLine":
        return cls(np.array(d["mean"]), np.array(d["direction"]), d["half_extent"])


@dataclass
class AttackResult:
    adversarial: VideoClip
    perturbation: PerturbationTensor
    loss_trace: list
    config: AttackConfig
    events: list = field(default_factory=list)


def make_target(bpm: float, n_frames: int, fps: float, phase: float = 0.0,
                start_frame: int = 0) -> Waveform:
    """Sine at ``bpm``; ``start_frame`` keeps windows of one video phase-continuous."""
    if not bpm > 0:
        raise ConfigError("target bpm must be positive")
    t = (start_frame + np.arange(n_frames)) / fps
    return Waveform(np.sin(2 * np.pi * (bpm / 60.0) * t + phase), fps)


def _samples(target) -> np.ndarray:
    return np.asarray(target.samples if isinstance(target, Waveform) else target, dtype=float)


def fgsm_step(model, clip: VideoClip, target, beta: float) -> VideoClip:
    """One targeted step: x - beta * sign(grad_x J(x, target))."""
    _, grad = model.loss_and_input_grad(clip.data, _samples(target))
    return VideoClip(clip.data - beta * np.sign(grad), clip.fps)


def temporal_reduce(grad: np.ndarray) -> np.ndarray:
    """Average a (N, H, W, C) gradient over rows and columns -> (N, C)."""
    grad = np.asarray(grad, dtype=float)
    if grad.ndim != 4:
        raise ShapeMismatch(f"expected a 4-D gradient, got shape {grad.shape}")
    return grad.mean(axis=(1, 2))


def nonnegative_clip(g: np.ndarray) -> np.ndarray:
    return np.minimum(g, 0.0)


def _apply(x: np.ndarray, eta: np.ndarray) -> np.ndarray:
    return x + (eta[:, None, None, :] if eta.ndim == 2 else eta)


def c_mi_fgsm(model, clip: VideoClip, target, cfg: AttackConfig,
              line: AttackLine | None = None, start_frame: int = 0) -> AttackResult:
    """Constrained momentum iterative FGSM on a single clip.

    The perturbation is kept as the optimisation state and projected onto
    the epsilon ball after every step; mathematically the projection never
    binds (T * alpha = epsilon) but it keeps rounding from leaking past the
    bound. With ``cfg.general`` the iterations are skipped and the
    line-projected sinusoid from :func:`general_attack` is returned.
    """
    x = clip.data
    y = _samples(target)
    if y.size != clip.n_frames:
        raise ShapeMismatch(f"target has {y.size} samples for {clip.n_frames} frames")
    if cfg.general:
        if line is None:
            raise ConfigError("the general attack needs a fitted AttackLine")
        eta = general_attack(line, cfg.target_bpm, clip.n_frames, clip.fps,
                             epsilon=cfg.epsilon, nonnegative=cfg.nonnegative,
                             start_frame=start_frame).data
        return AttackResult(VideoClip(_apply(x, eta), clip.fps),
                            PerturbationTensor(eta, cfg.epsilon), [], cfg)

    eps, alpha, mu = cfg.epsilon, cfg.step, cfg.decay
    shape = (clip.n_frames, 3) if cfg.temporal else x.shape
    eta = np.zeros(shape)
    g = np.zeros(shape)
    trace, events = [], []
    for t in range(cfg.iterations):
        loss, grad = model.loss_and_input_grad(_apply(x, eta), y)
        trace.append(float(loss))
        if cfg.temporal:
            grad = temporal_reduce(grad)
        l1 = np.abs(grad).sum()
        if l1 < VANISHED_L1:
            events.append({"iteration": t, "event": "gradient_vanished", "l1": float(l1)})
            g = mu * g
        else:
            g = mu * g + grad / l1
        if cfg.nonnegative:
            g = nonnegative_clip(g)
        eta = np.clip(eta - alpha * np.sign(g), -eps, eps)
    return AttackResult(VideoClip(_apply(x, eta), clip.fps), PerturbationTensor(eta, eps),
                        trace, cfg, events)


def fit_attack_line(perturbations) -> AttackLine:
    """Principal-axis line through pooled per-frame RGB perturbations.

    The segment is bounded at two standard deviations of the projections
    around their mean; points projecting beyond it are outliers and play no
    part in the attack.
    """
    pts = np.concatenate([np.asarray(p, dtype=float).reshape(-1, 3) for p in perturbations])
    if pts.shape[0] < 100:
        raise ConfigError(f"need at least 100 RGB points to fit a line, got {pts.shape[0]}")
    m = pts.mean(axis=0)
    centered = pts - m
    cov = centered.T @ centered / pts.shape[0]
    evals, evecs = np.linalg.eigh(cov)
    if evals[-1] <= 1e-15 * max(1.0, np.abs(m).max() ** 2):
        raise DegenerateCloud("perturbation points do not span any direction")
    d = evecs[:, -1]
    if d.sum() < 0:
        d = -d
    sigma = (centered @ d).std()
    return AttackLine(m, d / np.linalg.norm(d), 2.0 * sigma)


def general_attack(line: AttackLine, target_bpm: float, n_frames: int, fps: float, *,
                   epsilon: float = 1.0, nonnegative: bool = True,
                   start_frame: int = 0) -> PerturbationTensor:
    """Per-frame RGB offsets m + d * h * sin(2 pi f t) along the fitted line.

    With ``nonnegative`` each channel is shifted up until its lowest value is
    zero; if any channel then exceeds ``epsilon`` the whole orbit is scaled
    down to fit. Both adjustments use the orbit's analytic extremes, so the
    offsets do not depend on how many frames are requested.
    """
    s = make_target(target_bpm, n_frames, fps, 0.0, start_frame).samples
    swing = np.abs(line.direction) * line.half_extent
    lo, hi = line.mean - swing, line.mean + swing
    shift = np.maximum(-lo, 0.0) if nonnegative else np.zeros(3)
    peak = max(np.abs(lo + shift).max(), np.abs(hi + shift).max())
    scale = epsilon / peak if peak > epsilon else 1.0
    offsets = scale * (line.mean + shift + np.outer(s, line.direction * line.half_extent))
    if nonnegative:
        # rounding can leave -1e-17 at the trough
        offsets = np.maximum(offsets, 0.0)
    return PerturbationTensor(np.clip(offsets, -epsilon, epsilon), epsilon)


def attack_video(model, video: VideoClip, cfg: AttackConfig,
                 pcfg: PipelineConfig = PipelineConfig(),
                 line: AttackLine | None = None):
    """Attack every sliding clip of ``video`` independently and stitch.

    Frames covered by several windows keep the perturbation of the first
    window that contains them. Returns ``(adversarial video, perturbation,
    per-window loss traces, events)``.
    """
    n = video.n_frames
    if cfg.general:
        if line is None:
            raise ConfigError("the general attack needs a fitted AttackLine")
        eta = general_attack(line, cfg.target_bpm, n, video.fps,
                             epsilon=cfg.epsilon, nonnegative=cfg.nonnegative).data
        return VideoClip(_apply(video.data, eta), video.fps), PerturbationTensor(eta, cfg.epsilon), [], []

    shape = (n, 3) if cfg.temporal else video.shape
    eta = np.zeros(shape)
    owned = 0
    traces, events = [], []
    for s in window_starts(n, pcfg.clip_len, pcfg.stride):
        e = s + pcfg.clip_len
        target = make_target(cfg.target_bpm, pcfg.clip_len, video.fps, cfg.phase, start_frame=s)
        res = c_mi_fgsm(model, video.frames(s, e), target, cfg)
        traces.append(res.loss_trace)
        events.extend({**ev, "window_start": s} for ev in res.events)
        if e > owned:
            eta[owned:e] = res.perturbation.data[owned - s:]
            owned = e
    return (VideoClip(_apply(video.data, eta), video.fps), PerturbationTensor(eta, cfg.epsilon),
            traces, events)
