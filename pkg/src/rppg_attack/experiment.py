"""End-to-end evaluation run: data, training, line fit, ablation, LED scenario.

Every random draw derives from one seed, so two runs with equal settings
produce identical reports.
"""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attack import COMBOS, AttackConfig
from .core import ConfigError
from .estimators import Chrom, MicroPulseNet, Pos, save_params, train_micro
from .evaluation import TARGETS_BPM, emit_report, fit_general_lines, run_ablation
from .physical import PHYSICAL_TARGETS_BPM, LedModel, run_physical_scenario
from .pipeline import PipelineConfig
from .synth import SceneConfig, generate_dataset, random_scenes

log = logging.getLogger(__name__)

# offsets from the run seed, one per data split
_SPLIT_SEEDS = {"train": 1000, "validation": 2000, "test": 3000, "physical": 4000, "mask": 5000}


@dataclass
class SplitConfig:
    n_clips: int
    duration_s: float
    hr_range: tuple = (40.0, 180.0)


@dataclass
class EvaluateConfig:
    train: SplitConfig = field(default_factory=lambda: SplitConfig(16, 20.0))
    validation: SplitConfig = field(default_factory=lambda: SplitConfig(3, 9.0, (60.0, 100.0)))
    test: SplitConfig = field(default_factory=lambda: SplitConfig(2, 36.0, (60.0, 100.0)))
    physical: SplitConfig = field(default_factory=lambda: SplitConfig(4, 60.0, (60.0, 100.0)))
    epochs: int = 15
    lr: float = 0.05
    height: int = 8
    width: int = 8
    targets: tuple = TARGETS_BPM
    combos: tuple = COMBOS
    physical_targets: tuple = PHYSICAL_TARGETS_BPM
    attack: AttackConfig = AttackConfig()
    led: LedModel = LedModel()
    mask: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "EvaluateConfig":
        d = dict(d)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown evaluate keys: {sorted(unknown)}")
        for key in ("train", "validation", "test", "physical"):
            if key in d:
                split = dict(d[key])
                if "hr_range" in split:
                    split["hr_range"] = tuple(split["hr_range"])
                d[key] = SplitConfig(**split)
        for key in ("targets", "combos", "physical_targets"):
            if key in d:
                d[key] = tuple(d[key])
        if "attack" in d:
            d["attack"] = AttackConfig.from_dict(d["attack"])
        if "led" in d:
            d["led"] = LedModel.from_dict(d["led"])
        cfg = cls(**d)
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for combo in self.combos:
            AttackConfig.from_constraints(combo)
        for name in ("train", "validation", "test", "physical"):
            split = getattr(self, name)
            if split.n_clips < 1 or not split.duration_s > 0:
                raise ConfigError(f"{name} split needs at least one clip of positive duration")
        if self.train.n_clips < 8:
            raise ConfigError("training needs at least 8 clips")
        if self.epochs < 1 or not self.lr > 0:
            raise ConfigError("epochs must be >= 1 and lr positive")

    def to_dict(self) -> dict:
        return {
            **{k: dataclasses.asdict(getattr(self, k)) for k in ("train", "validation", "test", "physical")},
            "epochs": self.epochs, "lr": self.lr, "height": self.height, "width": self.width,
            "targets": list(self.targets), "combos": list(self.combos),
            "physical_targets": list(self.physical_targets),
            "attack": self.attack.to_dict(), "led": self.led.to_dict(), "mask": self.mask,
        }


def split_scenes(split: SplitConfig, seed: int, name: str, cfg: EvaluateConfig) -> list:
    return random_scenes(split.n_clips, seed + _SPLIT_SEEDS[name], split.duration_s,
                         hr_range=split.hr_range, height=cfg.height, width=cfg.width)


def run_evaluation(cfg: EvaluateConfig, seed: int, out_dir, pcfg: PipelineConfig = PipelineConfig(),
                   params=None) -> dict:
    """Run everything and write ``report.csv``, ``report.json``,
    ``report.svg`` and the trained parameters under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_entries = []
    if params is None:
        train = generate_dataset(split_scenes(cfg.train, seed, "train", cfg))
        params = train_micro(train, epochs=cfg.epochs, lr=cfg.lr, seed=seed,
                             clip_len=pcfg.clip_len, training_log=log_entries)
    save_params(params, out / "params")
    net = MicroPulseNet(params)

    # generate_dataset adds the list index to each seed; the splits are far apart
    validation = generate_dataset(split_scenes(cfg.validation, seed, "validation", cfg))
    lines = None
    if any("G" in c.split("+") for c in cfg.combos) or cfg.physical_targets:
        lines = fit_general_lines(net, validation, base=cfg.attack, pcfg=pcfg)
        log.info("fitted general-attack lines")

    test = generate_dataset(split_scenes(cfg.test, seed, "test", cfg))
    ablation = run_ablation(net, test, cfg.targets, cfg.combos, lines=lines, base=cfg.attack,
                            pcfg=pcfg,
                            progress=lambda r: log.info("%s %s: success %.1f%%", r.constraints,
                                                        r.target_bpm, r.success_rate))
    reports = list(ablation.reports)
    summary = {"pooled": {c: ablation.pooled(c).row() for c in cfg.combos}}

    if cfg.physical_targets:
        subjects = split_scenes(cfg.physical, seed, "physical", cfg)
        mask = (SceneConfig(duration_s=cfg.physical.duration_s, height=cfg.height, width=cfg.width,
                            seed=seed + _SPLIT_SEEDS["mask"], has_pulse=False)
                if cfg.mask else None)
        scen = run_physical_scenario(subjects, lines["T+NN"], cfg.led, [net, Chrom(), Pos()],
                                     cfg.physical_targets, mask=mask, epsilon=cfg.attack.epsilon,
                                     amplitude_model=net, pcfg=pcfg)
        reports.extend(scen.reports)
        summary["physical"] = scen.summary()

    meta = {
        "seed": seed,
        "config": cfg.to_dict(),
        "pipeline": pcfg.to_dict(),
        "lines": {k: v.to_dict() for k, v in (lines or {}).items()},
        "training_log": log_entries,
        "summary": summary,
    }
    plot = next((r for r in ablation.cells if r.constraints == "T+G+NN"), ablation.cells[-1])
    emit_report(reports, out, ("csv", "json", "svg"), meta=meta, plot=plot)
    return {"ablation": ablation, "reports": reports, "meta": meta, "params": params}


def pooled_success(reports, constraints: str) -> float:
    """Frame-weighted success rate over all digital cells of one combination."""
    rows = [r for r in reports if r.scenario == "digital" and r.constraints == constraints]
    n = sum(r.n_frames for r in rows)
    return float(np.sum([r.success_rate * r.n_frames for r in rows]) / n)
