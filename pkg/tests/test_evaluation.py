import csv
import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from rppg_attack.core import ConfigError, EmptyInput, HeartRateSeries, ShapeMismatch
from rppg_attack.evaluation import (CSV_COLUMNS, MetricReport, emit_report, make_report, mae,
                                    mask_success_rate, reports_csv, rmse, run_ablation,
                                    success_rate)


# brute-force loop oracles

def mae_loop(p, r):
    s = 0.0
    for a, b in zip(p, r):
        s += abs(a - b)
    return s / len(p)


def rmse_loop(p, r):
    s = 0.0
    for a, b in zip(p, r):
        s += (a - b) ** 2
    return math.sqrt(s / len(p))


def success_loop(p, y, t):
    hits = 0
    for a, b, c in zip(p, y, t):
        if abs(a - b) > abs(a - c):
            hits += 1
    return 100.0 * hits / len(p)


def mask_loop(p, target):
    hits = 0
    for a in p:
        if abs(a - target) <= 2.0:
            hits += 1
    return 100.0 * hits / len(p)


def random_case(r):
    n = int(r.integers(1, 40))
    # quarter-bpm grid values make ties and boundary cases common
    p = np.round(r.uniform(30, 240, n) * 4) / 4
    y = np.round(r.uniform(30, 240, n) * 4) / 4
    t = np.round(r.uniform(30, 240, n) * 4) / 4
    if r.random() < 0.3:
        t = np.where(r.random(n) < 0.5, 2 * p - y, t)  # equidistant ties
    return p, y, t


def test_metric_oracles_10k():
    r = np.random.default_rng(2024)
    for _ in range(10_000):
        p, y, t = random_case(r)
        assert mae(p, y) == pytest.approx(mae_loop(p, y), rel=1e-12, abs=1e-12)
        assert rmse(p, y) == pytest.approx(rmse_loop(p, y), rel=1e-12, abs=1e-12)
        assert success_rate(p, y, t) == success_loop(p, y, t)
        tgt = float(t[0])
        assert mask_success_rate(p, tgt) == mask_loop(p, tgt)


def test_metric_examples():
    a = np.array([70.0, 80.0])
    assert mae(a, a) == 0 and rmse(a, a) == 0
    assert mae(a + 5, a) == 5
    assert mae(np.array([3.0, -4.0]), np.zeros(2)) == 3.5
    assert rmse(np.array([3.0, -4.0]), np.zeros(2)) == pytest.approx(math.sqrt(12.5))
    truth = np.full(10, 70.0)
    assert success_rate(np.full(10, 120.0), truth, 120.0) == 100.0
    assert success_rate(truth, truth, 120.0) == 0.0
    assert success_rate(np.full(10, 95.0), truth, 120.0) == 0.0  # tie fails
    assert mask_success_rate(np.full(5, 120.0), 120.0) == 100.0
    assert mask_success_rate(np.full(5, 125.0), 120.0) == 0.0
    assert mask_success_rate(np.full(5, 122.0), 120.0) == 100.0
    s = HeartRateSeries(np.full(4, 60.0), 30.0)
    assert mae(s, s) == 0.0


def test_metric_errors():
    with pytest.raises(EmptyInput):
        success_rate(np.zeros(0), np.zeros(0), 1.0)
    with pytest.raises(EmptyInput):
        mask_success_rate(np.zeros(0), 1.0)
    with pytest.raises(ShapeMismatch):
        mae(np.zeros(3), np.zeros(4))


@given(hnp.arrays(np.float64, st.integers(1, 50), elements=st.floats(30, 306)),
       hnp.arrays(np.float64, 50, elements=st.floats(30, 306)))
def test_rmse_dominates_mae(p, y):
    y = y[:len(p)]
    assert rmse(p, y) >= mae(p, y) - 1e-12


def test_report_views():
    p = np.array([100.0, 110.0, 119.0])
    y = np.array([70.0, 70.0, 70.0, 70.0])
    rep = make_report(p, y, 120.0, scenario="digital", estimator="x", constraints="T")
    assert rep.n_frames == 3
    assert rep.mae == pytest.approx(np.mean([20, 10, 1]))
    assert rep.mae_truth == pytest.approx(np.mean([30, 40, 49]))
    assert rep.success_rate == 100.0
    clean = make_report(p, y, None, scenario="digital", estimator="x", constraints="clean")
    assert clean.success_rate is None and clean.mae == clean.mae_truth
    mask = make_report(p, None, 119.0, scenario="mask", estimator="x", constraints="LED")
    assert mask.success_rate == 100 / 3 and mask.mae_truth is None
    with pytest.raises(ValueError):
        MetricReport("s", "e", "c", 1.0, 5.0, 1.0, 0.0, 1)
    with pytest.raises(ConfigError):
        make_report(p, None, None, scenario="s", estimator="e", constraints="c")


def _reports():
    y = np.full(6, 70.0)
    return [make_report(np.full(6, t) + np.arange(6) * 0.1, y, t, scenario="digital",
                        estimator="micronet", constraints=c)
            for c in ("none", "T") for t in (100.0, 140.0)]


def test_emit_report(tmp_path):
    reps = _reports()
    paths = emit_report(reps, tmp_path, ("csv", "json", "svg"), meta={"seed": 1})
    assert [p.name for p in paths] == ["report.csv", "report.json", "report.svg"]
    rows = list(csv.DictReader(io.StringIO((tmp_path / "report.csv").read_text())))
    assert len(rows) == len(reps)
    assert list(rows[0])[:8] == ["scenario", "estimator", "constraints", "target_bpm", "mae",
                                 "rmse", "success_rate", "n_frames"]
    assert tuple(rows[0]) == CSV_COLUMNS
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["meta"] == {"seed": 1} and len(doc["reports"]) == 4
    assert (tmp_path / "report.svg").read_text().startswith("<svg")
    first = {p.name: p.read_bytes() for p in paths}
    emit_report(reps, tmp_path, ("csv", "json", "svg"), meta={"seed": 1})
    assert first == {p.name: p.read_bytes() for p in paths}
    with pytest.raises(EmptyInput):
        emit_report([], tmp_path)
    with pytest.raises(ConfigError):
        emit_report(reps, tmp_path, ("xlsx",))


def test_reports_csv_blank_for_missing():
    y = np.full(3, 70.0)
    clean = make_report(y + 1, y, None, scenario="d", estimator="e", constraints="clean")
    line = reports_csv([clean]).splitlines()[1].split(",")
    assert line[3] == "" and line[6] == ""


class Offset:
    """Fake model: predicts the clip's mean intensity, attackable through
    its gradient, which is all ones."""

    name = "fake"
    clip_based = True

    def estimate(self, clip):
        from rppg_attack.core import Waveform
        return Waveform(clip.data.mean(axis=(1, 2, 3)), clip.fps)

    def loss_and_input_grad(self, x, y):
        return 1.0, np.ones_like(x)


def test_ablation_grid_populated_and_ordered():
    from rppg_attack.attack import AttackConfig, AttackLine
    from rppg_attack.synth import SceneConfig, generate_clip
    ds = [generate_clip(SceneConfig(duration_s=31.0, height=2, width=2, seed=s)) for s in (1, 2)]
    line = AttackLine(np.full(3, 0.2), np.array([0.0, 0.6, 0.8]), 0.2)
    res = run_ablation(Offset(), ds, targets=(60, 120), lines={"T+NN": line, "T": line},
                       base=AttackConfig(iterations=2))
    assert [(r.constraints, r.target_bpm) for r in res.cells] == [
        (c, t) for c in ("none", "T", "T+G", "T+NN", "T+G+NN") for t in (60.0, 120.0)]
    assert res.baseline.constraints == "clean"
    assert all(r.n_frames == 2 * (930 - 900 + 1) for r in res.cells)
    pooled = res.pooled("T")
    assert pooled.n_frames == 2 * res.cell("T", 60).n_frames
    with pytest.raises(ConfigError):
        run_ablation(Offset(), ds, targets=(60,), combos=("T+G",))
    with pytest.raises(ConfigError):
        run_ablation(Offset(), [], targets=(60,))
