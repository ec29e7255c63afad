"""Command-line entry point: ``rppg-attack <subcommand> ...``.

Exit codes: 0 success, 2 invalid input or configuration, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .attack import AttackConfig, AttackLine, attack_video, c_mi_fgsm, general_attack, make_target
from .core import HeartRateSeries, RppgError, VideoClip, Waveform
from .estimators import Chrom, MicroPulseNet, Pos, load_params, save_params, train_micro
from .npyio import read_npy, write_npy
from .physical import LedModel, run_physical_scenario, simulate_led
from .pipeline import PipelineConfig, extract_heart_rate, predict_video
from .synth import GroundTruth, SceneConfig, generate_clip, generate_dataset, make_mask_medium

log = logging.getLogger("rppg_attack")

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


class UsageError(Exception):
    """Bad arguments or input files; maps to exit code 2."""


def _load_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as e:
        raise UsageError(f"no such file: {path}") from e
    except json.JSONDecodeError as e:
        raise UsageError(f"{path}: invalid JSON ({e})") from e


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _load_clip(path, fps: float) -> VideoClip:
    if not Path(path).exists():
        raise UsageError(f"no such file: {path}")
    return VideoClip(read_npy(path), fps)


def _pipeline(cfg: dict) -> PipelineConfig:
    return PipelineConfig(**cfg.get("pipeline", {}))


def _scene_list(obj) -> list:
    items = obj["scenes"] if isinstance(obj, dict) else obj
    if not isinstance(items, list) or not items:
        raise UsageError("scene list must be a non-empty JSON list")
    return [SceneConfig.from_dict(d) for d in items]


def _estimator(name: str, params_dir):
    if name == "chrom":
        return Chrom()
    if name == "pos":
        return Pos()
    if name == "micronet":
        if params_dir is None:
            raise UsageError("micronet needs --params")
        return MicroPulseNet(load_params(params_dir))
    raise UsageError(f"unknown estimator {name!r}")


def cmd_synth(args, cfg, out: Path) -> None:
    scenes_path = args.scenes
    scenes = _scene_list(_load_json(scenes_path) if scenes_path else cfg.get("scenes"))
    if args.seed is not None:
        scenes = [s.__class__.from_dict({**s.to_dict(), "seed": args.seed + s.seed}) for s in scenes]
    truth = []
    for i, (clip, gt) in enumerate(generate_dataset(scenes)):
        name = f"clip_{i:03d}"
        write_npy(out / f"{name}.npy", clip.data)
        entry = {"clip": f"{name}.npy", "fps": clip.fps, "config": gt.config.to_dict(),
                 "bvp": None, "hr_bpm": None}
        if gt.bvp is not None:
            write_npy(out / f"bvp_{i:03d}.npy", gt.bvp.samples)
            entry["bvp"] = f"bvp_{i:03d}.npy"
            entry["hr_bpm"] = gt.config.heart_rate_bpm
        truth.append(entry)
    _write_json(out / "truth.json", truth)


def _read_dataset(directory):
    d = Path(directory)
    items = []
    for entry in _load_json(d / "truth.json"):
        clip = _load_clip(d / entry["clip"], entry["fps"])
        bvp = hr = None
        if entry.get("bvp"):
            bvp = Waveform(read_npy(d / entry["bvp"]), entry["fps"])
            hr = HeartRateSeries(np.full(clip.n_frames, float(entry["hr_bpm"])), entry["fps"])
        items.append((clip, GroundTruth(bvp, hr, SceneConfig.from_dict(entry["config"]))))
    return items


def cmd_train(args, cfg, out: Path) -> None:
    data = [it for it in _read_dataset(args.data) if it[1].bvp is not None]
    tcfg = {"epochs": 15, "lr": 0.05, **cfg.get("train", {})}
    if args.epochs is not None:
        tcfg["epochs"] = args.epochs
    entries = []
    params = train_micro(data, seed=args.seed or 0, training_log=entries,
                         clip_len=_pipeline(cfg).clip_len, **tcfg)
    save_params(params, out / "params")
    with open(out / "training_log.jsonl", "w") as f:
        for e in entries:
            f.write(json.dumps(e, sort_keys=True) + "\n")


def cmd_estimate(args, cfg, out: Path) -> None:
    pcfg = _pipeline(cfg)
    clip = _load_clip(args.clip, args.fps)
    est = _estimator(args.estimator, args.params)
    w = predict_video(est, clip, pcfg)
    write_npy(out / "waveform.npy", w.samples)
    hr = extract_heart_rate(w, pcfg)
    with open(out / "hr.csv", "w", newline="") as f:
        wr = csv.writer(f, lineterminator="\n")
        wr.writerow(["frame_index", "bpm"])
        for i, v in enumerate(hr.bpm):
            wr.writerow([i, f"{v:.6f}"])


def cmd_attack(args, cfg, out: Path) -> None:
    acfg_dict = dict(cfg.get("attack", {}))
    if args.attack_config:
        acfg_dict.update(_load_json(args.attack_config))
    if args.seed is not None:
        acfg_dict["seed"] = args.seed
    acfg = AttackConfig.from_dict(acfg_dict)
    clip = _load_clip(args.clip, args.fps)
    line = AttackLine.from_dict(_load_json(args.line)) if args.line else None
    net = MicroPulseNet(load_params(args.params))
    pcfg = _pipeline(cfg)
    if clip.n_frames > pcfg.clip_len and not args.single_clip:
        adv, eta, traces, events = attack_video(net, clip, acfg, pcfg, line)
    else:
        target = make_target(acfg.target_bpm, clip.n_frames, clip.fps, acfg.phase)
        res = c_mi_fgsm(net, clip, target, acfg, line)
        adv, eta, traces, events = res.adversarial, res.perturbation, [res.loss_trace], res.events
    write_npy(out / "adversarial.npy", adv.data)
    write_npy(out / "perturbation.npy", eta.data)
    _write_json(out / "trace.json", {"config": acfg.to_dict(), "loss_traces": traces,
                                      "events": events})


def cmd_simulate_physical(args, cfg, out: Path) -> None:
    scenes = _scene_list(_load_json(args.scenes))
    line = AttackLine.from_dict(_load_json(args.line))
    led = LedModel.from_dict(_load_json(args.led)) if args.led else LedModel()
    targets = [float(t) for t in (args.targets or cfg.get("targets", [40, 120, 200, 300]))]
    eps = float(cfg.get("epsilon", 1.0))
    manifest = {"line": line.to_dict(), "led": led.to_dict(), "targets": targets, "videos": []}
    for i, scene in enumerate(scenes):
        clip, _ = make_mask_medium(scene) if not scene.has_pulse else generate_clip(scene)
        write_npy(out / f"subject_{i:03d}_control.npy", clip.data)
        manifest["videos"].append({"subject": i, "target_bpm": None, "medium": "mask" if not scene.has_pulse else "live",
                                   "clip": f"subject_{i:03d}_control.npy", "config": scene.to_dict()})
        for t in targets:
            offsets = general_attack(line, t, clip.n_frames, clip.fps, epsilon=eps, nonnegative=True)
            lit = simulate_led(clip, offsets, led)
            name = f"subject_{i:03d}_led_{t:g}.npy"
            write_npy(out / name, lit.clip.data)
            manifest["videos"].append({"subject": i, "target_bpm": t, "clip": name,
                                       "medium": "mask" if not scene.has_pulse else "live",
                                       "clamped_values": lit.clamped_values,
                                       "clamped_fraction": lit.clamped_fraction})
    if args.params:
        live = [s for s in scenes if s.has_pulse]
        if live:
            net = MicroPulseNet(load_params(args.params))
            masks = [s for s in scenes if not s.has_pulse]
            scen = run_physical_scenario(live, line, led, [net, Chrom(), Pos()], targets,
                                         mask=masks[0] if masks else None, epsilon=eps,
                                         amplitude_model=net, pcfg=_pipeline(cfg))
            manifest["metrics"] = [r.row() for r in scen.reports]
            manifest["summary"] = scen.summary()
    _write_json(out / "scenario.json", manifest)


def cmd_evaluate(args, cfg, out: Path) -> None:
    from .experiment import EvaluateConfig, run_evaluation
    ecfg = EvaluateConfig.from_dict(cfg.get("evaluate", {}))
    params = load_params(args.params) if args.params else None
    run_evaluation(ecfg, args.seed or 0, out, _pipeline(cfg), params=params)


def cmd_report(args, cfg, out: Path) -> None:
    from .evaluation import MetricReport, emit_report
    doc = _load_json(args.input)
    if not isinstance(doc, dict) or "reports" not in doc:
        raise UsageError(f"{args.input} is not a report dump")
    reports = []
    for d in doc["reports"]:
        d = dict(d)
        for k in ("residuals", "pred_hr"):
            d[k] = np.asarray(d.get(k) or [], dtype=float)
        d["truth_hr"] = None if d.get("truth_hr") is None else np.asarray(d["truth_hr"], dtype=float)
        reports.append(MetricReport(**d))
    formats = tuple(args.format.split(","))
    emit_report(reports, out, formats, meta=doc.get("meta"))


def _global_flags(parser, default) -> None:
    parser.add_argument("--seed", type=int, default=default(None), help="master random seed")
    parser.add_argument("--config", default=default(None), help="JSON settings file")
    parser.add_argument("--out", default=default("."), help="output directory")
    parser.add_argument("-v", "--verbose", action="store_true", default=default(False))


def build_parser() -> argparse.ArgumentParser:
    # global flags go before or after the subcommand; the subcommand copy
    # suppresses its defaults so it cannot overwrite a value given earlier
    common = argparse.ArgumentParser(add_help=False)
    _global_flags(common, lambda v: argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="rppg-attack",
                                description="Pulse estimation and adversarial attacks on synthetic face video.")
    _global_flags(p, lambda v: v)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="render synthetic clips")
    s.add_argument("--scenes", help="JSON scene list (else the config's 'scenes')")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("train", parents=[common], help="train MicroPulseNet")
    s.add_argument("--data", required=True, help="directory written by 'synth'")
    s.add_argument("--epochs", type=int)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("estimate", parents=[common], help="waveform and heart rate for a clip")
    s.add_argument("--clip", required=True)
    s.add_argument("--estimator", choices=("micronet", "chrom", "pos"), default="micronet")
    s.add_argument("--params", help="MicroPulseNet parameter directory")
    s.add_argument("--fps", type=float, default=30.0)
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("attack", parents=[common], help="C-MI-FGSM on a clip or video")
    s.add_argument("--clip", required=True)
    s.add_argument("--params", required=True)
    s.add_argument("--attack-config", help="JSON with AttackConfig keys")
    s.add_argument("--line", help="attack-line JSON (needed for G)")
    s.add_argument("--fps", type=float, default=30.0)
    s.add_argument("--single-clip", action="store_true",
                   help="attack the input as one clip instead of sliding windows")
    s.set_defaults(func=cmd_attack)

    s = sub.add_parser("simulate-physical", parents=[common], help="simulated LED attack")
    s.add_argument("--scenes", required=True)
    s.add_argument("--line", required=True)
    s.add_argument("--led", help="LED model JSON")
    s.add_argument("--targets", type=float, nargs="+")
    s.add_argument("--params", help="score the scenario with this MicroPulseNet")
    s.set_defaults(func=cmd_simulate_physical)

    s = sub.add_parser("evaluate", parents=[common], help="full ablation and LED scenario")
    s.add_argument("--params", help="skip training and use these parameters")
    s.set_defaults(func=cmd_evaluate)

    s = sub.add_parser("report", parents=[common], help="re-emit reports from a JSON dump")
    s.add_argument("--input", required=True)
    s.add_argument("--format", default="csv,json,svg")
    s.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_json(args.config) if args.config else {}
        if not isinstance(cfg, dict):
            raise UsageError("--config must hold a JSON object")
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        args.func(args, cfg, out)
    except (UsageError, ValueError, KeyError, TypeError) as e:
        # RppgError subclasses are ValueErrors: bad data or settings
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID
    except (RppgError, OSError, ArithmeticError, RuntimeError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
