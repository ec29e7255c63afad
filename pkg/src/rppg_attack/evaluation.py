"""Heart-rate metrics, the digital ablation grid and report emission."""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attack import COMBOS, AttackConfig, AttackLine, attack_video, fit_attack_line
from .core import ConfigError, EmptyInput, HeartRateSeries, ShapeMismatch
from .pipeline import PipelineConfig, align_series, extract_heart_rate, predict_video

log = logging.getLogger(__name__)

TARGETS_BPM = tuple(range(20, 241, 20))
MASK_TOLERANCE_BPM = 2.0
CSV_COLUMNS = ("scenario", "estimator", "constraints", "target_bpm", "mae", "rmse",
               "success_rate", "n_frames", "mae_truth", "rmse_truth")


def _arr(x) -> np.ndarray:
    return x.bpm if isinstance(x, HeartRateSeries) else np.asarray(x, dtype=float).reshape(-1)


def _pair(pred, ref):
    p, r = _arr(pred), _arr(ref)
    if p.size == 0 or r.size == 0:
        raise EmptyInput("metric needs at least one frame")
    if p.shape != r.shape:
        raise ShapeMismatch(f"series lengths differ: {p.size} vs {r.size}; align them first")
    return p, r


def mae(pred, ref) -> float:
    p, r = _pair(pred, ref)
    return float(np.mean(np.abs(p - r)))


def rmse(pred, ref) -> float:
    p, r = _pair(pred, ref)
    return float(np.sqrt(np.mean((p - r) ** 2)))


def success_rate(pred, truth, target) -> float:
    """Percent of frames where the prediction is strictly closer to the
    target than to the truth. ``target`` may be a scalar bpm."""
    p, y = _pair(pred, truth)
    t = np.broadcast_to(np.asarray(_arr(target) if not np.isscalar(target) else target, dtype=float),
                        p.shape)
    return 100.0 * float(np.count_nonzero(np.abs(p - y) > np.abs(p - t))) / p.size


def mask_success_rate(pred, target_bpm: float, tolerance: float = MASK_TOLERANCE_BPM) -> float:
    """Percent of frames within ``tolerance`` bpm of the target (inclusive)."""
    p = _arr(pred)
    if p.size == 0:
        raise EmptyInput("metric needs at least one frame")
    return 100.0 * float(np.count_nonzero(np.abs(p - target_bpm) <= tolerance)) / p.size


@dataclass
class MetricReport:
    """One table cell.

    ``mae``/``rmse``/``residuals`` compare the prediction with the attack
    target, or with the truth for clean cells; ``mae_truth``/``rmse_truth``
    always compare with the truth when one exists.
    """

    scenario: str
    estimator: str
    constraints: str
    target_bpm: float | None
    mae: float
    rmse: float
    success_rate: float | None
    n_frames: int
    mae_truth: float | None = None
    rmse_truth: float | None = None
    residuals: np.ndarray = field(default_factory=lambda: np.zeros(0))
    pred_hr: np.ndarray = field(default_factory=lambda: np.zeros(0))
    truth_hr: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.mae <= self.rmse + 1e-9 * max(1.0, self.rmse):
            raise ValueError(f"inconsistent metrics: mae={self.mae}, rmse={self.rmse}")
        if self.success_rate is not None and not 0.0 <= self.success_rate <= 100.0:
            raise ValueError(f"success rate {self.success_rate} outside [0, 100]")

    def row(self) -> dict:
        return {k: getattr(self, k) for k in CSV_COLUMNS}

    def to_dict(self) -> dict:
        d = self.row()
        d["residuals"] = self.residuals.tolist()
        d["pred_hr"] = self.pred_hr.tolist()
        d["truth_hr"] = None if self.truth_hr is None else self.truth_hr.tolist()
        return d


def make_report(pred, truth, target_bpm: float | None, *, scenario: str, estimator: str,
                constraints: str) -> MetricReport:
    """Score pooled per-frame HR. ``truth`` is None for pulse-free media,
    which are scored with :func:`mask_success_rate`."""
    p = _arr(pred)
    if p.size == 0:
        raise EmptyInput("no frames to score")
    y = None if truth is None else _arr(truth)
    if y is not None:
        p, y = align_series(p, y)
    if target_bpm is None:
        if y is None:
            raise ConfigError("a clean cell needs ground truth")
        res = p - y
        return MetricReport(scenario, estimator, constraints, None, mae(p, y), rmse(p, y), None,
                            p.size, mae(p, y), rmse(p, y), res, p, y)
    t = np.full(p.size, float(target_bpm))
    rate = mask_success_rate(p, target_bpm) if y is None else success_rate(p, y, t)
    return MetricReport(scenario, estimator, constraints, float(target_bpm), mae(p, t), rmse(p, t),
                        rate, p.size,
                        None if y is None else mae(p, y), None if y is None else rmse(p, y),
                        p - t, p, y)


def truth_hr(truth, pcfg: PipelineConfig = PipelineConfig()) -> np.ndarray:
    """Reference HR: the extractor run directly on the embedded pulse."""
    return extract_heart_rate(truth.bvp, pcfg).bpm


def fit_general_lines(model, validation, targets=(40.0, 100.0, 160.0), *,
                      base: AttackConfig = AttackConfig(),
                      pcfg: PipelineConfig = PipelineConfig()) -> dict:
    """Fit the general-attack lines from digital attacks on validation clips.

    Returns ``{"T+NN": line, "T": line}``: the first pools T+NN
    perturbations and drives T+G+NN; the second pools T-only perturbations
    and drives T+G, which has no nonnegativity shift.
    """
    validation = list(validation)
    if not validation:
        raise ConfigError("line fitting needs at least one validation clip")
    pools = {"T+NN": [], "T": []}
    for i, (clip, _) in enumerate(validation):
        tgt = float(targets[i % len(targets)])
        for label in pools:
            cfg = AttackConfig.from_constraints(label, **{**_base_kwargs(base), "target_bpm": tgt})
            _, eta, _, _ = attack_video(model, clip, cfg, pcfg)
            pools[label].append(eta.data)
    return {label: fit_attack_line(pts) for label, pts in pools.items()}


def _base_kwargs(base: AttackConfig) -> dict:
    return {"epsilon": base.epsilon, "iterations": base.iterations, "decay": base.decay,
            "phase": base.phase, "seed": base.seed}


def _line_for(label: str, lines: dict | None) -> AttackLine | None:
    if "G" not in label.split("+"):
        return None
    if not lines:
        raise ConfigError(f"cell {label} needs fitted general-attack lines")
    return lines["T+NN"] if "NN" in label.split("+") else lines.get("T", lines["T+NN"])


@dataclass
class AblationResult:
    baseline: MetricReport
    cells: list

    @property
    def reports(self) -> list:
        return [self.baseline, *self.cells]

    def cell(self, constraints: str, target_bpm: float) -> MetricReport:
        for r in self.cells:
            if r.constraints == constraints and r.target_bpm == float(target_bpm):
                return r
        raise KeyError((constraints, target_bpm))

    def pooled(self, constraints: str) -> MetricReport:
        """All targets of one constraint combination pooled frame by frame."""
        rows = [r for r in self.cells if r.constraints == constraints]
        if not rows:
            raise KeyError(constraints)
        p = np.concatenate([r.pred_hr for r in rows])
        y = np.concatenate([r.truth_hr for r in rows])
        t = np.concatenate([np.full(r.n_frames, r.target_bpm) for r in rows])
        return MetricReport(rows[0].scenario, rows[0].estimator, constraints, None,
                            mae(p, t), rmse(p, t), success_rate(p, y, t), p.size,
                            mae(p, y), rmse(p, y), p - t, p, y)


def run_ablation(model, dataset, targets=TARGETS_BPM, combos=COMBOS, *,
                 lines: dict | None = None, base: AttackConfig = AttackConfig(),
                 pcfg: PipelineConfig = PipelineConfig(), scenario: str = "digital",
                 progress=None) -> AblationResult:
    """Attack every clip of ``dataset`` for each (combo, target) cell.

    Per-frame HR is pooled over clips within a cell. Cells are ordered by
    combo then target. ``lines`` comes from :func:`fit_general_lines` and is
    required when any combo includes G.
    """
    dataset = list(dataset)
    if not dataset:
        raise ConfigError("ablation needs at least one clip")
    for combo in combos:
        AttackConfig.from_constraints(combo)
        _line_for(combo, lines)
    truths = [truth_hr(gt, pcfg) for _, gt in dataset]
    name = getattr(model, "name", type(model).__name__)

    clean = [extract_heart_rate(predict_video(model, clip, pcfg), pcfg).bpm for clip, _ in dataset]
    baseline = make_report(np.concatenate([align_series(p, y)[0] for p, y in zip(clean, truths)]),
                           np.concatenate([align_series(p, y)[1] for p, y in zip(clean, truths)]),
                           None, scenario=scenario, estimator=name, constraints="clean")
    cells = []
    for combo in combos:
        line = _line_for(combo, lines)
        for tgt in targets:
            cfg = AttackConfig.from_constraints(combo, **{**_base_kwargs(base), "target_bpm": float(tgt)})
            preds, refs = [], []
            for (clip, _), y in zip(dataset, truths):
                adv, _, _, events = attack_video(model, clip, cfg, pcfg, line)
                if events:
                    log.warning("%s @ %s bpm: %d vanished-gradient steps", combo, tgt, len(events))
                p, y2 = align_series(extract_heart_rate(predict_video(model, adv, pcfg), pcfg).bpm, y)
                preds.append(p)
                refs.append(y2)
            rep = make_report(np.concatenate(preds), np.concatenate(refs), float(tgt),
                              scenario=scenario, estimator=name, constraints=combo)
            cells.append(rep)
            if progress is not None:
                progress(rep)
    return AblationResult(baseline, cells)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6f}"
    return str(v)


def reports_csv(reports) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in reports:
        w.writerow([_fmt(r.row()[k]) for k in CSV_COLUMNS])
    return buf.getvalue()


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _json_safe(x) for k, x in v.items()}
    if isinstance(v, list):
        return [_json_safe(x) for x in v]
    return v


def reports_json(reports, meta: dict | None = None) -> str:
    doc = {"meta": meta or {}, "reports": [r.to_dict() for r in reports]}
    return json.dumps(_json_safe(doc), indent=1, sort_keys=True) + "\n"


def hr_plot_svg(report: MetricReport, width: int = 640, height: int = 320) -> str:
    """Predicted versus reference HR for one cell as a plain SVG line plot."""
    series = [("predicted", report.pred_hr, "#c0392b")]
    if report.truth_hr is not None:
        series.append(("truth", report.truth_hr, "#2c3e50"))
    if report.target_bpm is not None:
        series.append(("target", np.full(report.n_frames, report.target_bpm), "#27ae60"))
    vals = np.concatenate([s for _, s, _ in series])
    lo, hi = float(vals.min()) - 5.0, float(vals.max()) + 5.0
    m = 40
    n = max(report.n_frames - 1, 1)

    def xy(i, v):
        return m + (width - 2 * m) * i / n, height - m - (height - 2 * m) * (v - lo) / (hi - lo)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{m}" y="20" font-size="12">{report.scenario} / {report.estimator} / '
           f'{report.constraints} / target {_fmt(report.target_bpm) or "none"}</text>',
           f'<text x="4" y="{m}" font-size="10">{hi:.0f} bpm</text>',
           f'<text x="4" y="{height - m}" font-size="10">{lo:.0f} bpm</text>']
    for k, (label, s, colour) in enumerate(series):
        pts = " ".join(f"{x:.1f},{y:.1f}" for x, y in (xy(i, v) for i, v in enumerate(s)))
        out.append(f'<polyline fill="none" stroke="{colour}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{width - 120}" y="{20 + 14 * k}" font-size="11" fill="{colour}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_report(reports, out_dir: str | os.PathLike, formats=("csv", "json"),
                meta: dict | None = None, plot: MetricReport | None = None) -> list:
    """Write ``report.csv``, ``report.json`` and optionally ``report.svg``.

    Output depends only on the reports, so re-emission is byte-identical.
    Returns the written paths.
    """
    reports = list(reports)
    if not reports:
        raise EmptyInput("no reports to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt == "csv":
            path = out / "report.csv"
            path.write_text(reports_csv(reports))
        elif fmt == "json":
            path = out / "report.json"
            path.write_text(reports_json(reports, meta))
        elif fmt == "svg":
            path = out / "report.svg"
            path.write_text(hr_plot_svg(plot if plot is not None else reports[-1]))
        else:
            raise ConfigError(f"unknown report format {fmt!r}")
        written.append(path)
    return written
