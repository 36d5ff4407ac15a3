"""Command-line surface: simulate, estimate, evaluate, compare.

Exit codes: 0 success, 1 estimation degenerate (no usable output),
2 usage or input error.
"""

import argparse
import os
import sys
from dataclasses import replace

import numpy as np

from . import baseline, evaluation, frameio, pipeline, simulator
from .config import DEFAULTS, build_config
from .evaluation import _write_csv


class DegenerateError(RuntimeError):
    """Estimation produced no usable output."""


def _add_config_flags(parser):
    parser.add_argument("--config", help="key=value config file")
    for key, default in DEFAULTS.items():
        flag = "--" + key.replace("_", "-")
        kind = type(default)
        parser.add_argument(flag, type=kind, default=None, dest=key)


def _config_from_args(args):
    overrides = {k: getattr(args, k) for k in DEFAULTS}
    return build_config(config_file=args.config, overrides=overrides)


def cmd_simulate(args):
    presets = simulator.preset_scenes()
    if args.scene in presets:
        spec = presets[args.scene]
    elif os.path.isfile(args.scene):
        spec = simulator.load_scene(args.scene)
    else:
        raise frameio.FormatError(f"unknown scene {args.scene!r} (presets: {', '.join(sorted(presets))})")
    if args.seed is not None:
        spec = replace(spec, seed=args.seed)
    seq, truth = simulator.render(spec)
    os.makedirs(args.out, exist_ok=True)
    frameio.store_sequence(seq, os.path.join(args.out, "frames"))
    truth.write(os.path.join(args.out, "truth"))
    simulator.write_scene(spec, os.path.join(args.out, "scene.txt"))
    print(f"rendered {len(seq)} frames ({seq.width}x{seq.height} @ {seq.fps:g} fps) to {args.out}")
    return 0


def _load_inputs(frames_dir, regions_path):
    if not os.path.isdir(frames_dir):
        raise frameio.FormatError(f"frames directory not found: {frames_dir}")
    if not os.path.isfile(regions_path):
        raise frameio.FormatError(f"region file not found: {regions_path}")
    return frameio.load_sequence(frames_dir), frameio.load_regions(regions_path)


def _run_one(seq, regions, estimator, cfg):
    if estimator == "distanceppg":
        return pipeline.run_estimator(seq, regions, cfg)
    if estimator == "face_average":
        return baseline.run_face_average(seq, regions, cfg)
    raise frameio.FormatError(f"unknown estimator {estimator!r}")


def _write_run(run, outdir, estimator):
    os.makedirs(outdir, exist_ok=True)
    frameio.store_waveform(os.path.join(outdir, "ppg.csv"), run.samples, run.fps)
    _write_csv(
        os.path.join(outdir, "epochs.csv"),
        ["epoch", "start_s", "seconds", "coarse_pr_bpm", "contributing_rois", "total_rois"],
        [
            (
                e.epoch,
                e.start_frame / run.fps,
                e.n_frames / run.fps,
                e.coarse_pr if e.coarse_pr is not None else float("nan"),
                e.contributing,
                e.n_rois,
            )
            for e in run.epochs
        ],
    )
    weight_rows = []
    trace_rows = []
    for e in run.epochs:
        for roi_id in sorted(set(e.weights) | set(e.gate_reasons)):
            weight_rows.append(
                (
                    e.epoch,
                    roi_id,
                    e.weights.get(roi_id, 0.0),
                    e.gate_reasons.get(roi_id, ""),
                )
            )
        for roi_id in sorted(e.channels):
            trace = e.channels[roi_id]
            for k, v in enumerate(trace):
                trace_rows.append((e.epoch, roi_id, e.start_frame + k, v))
    _write_csv(os.path.join(outdir, "weights.csv"), ["epoch", "roi_id", "weight", "gate_reason"], weight_rows)
    if estimator == "distanceppg":
        _write_csv(os.path.join(outdir, "roi_traces.csv"), ["epoch", "roi_id", "frame", "filtered"], trace_rows)


def cmd_estimate(args):
    seq, regions = _load_inputs(args.frames, args.regions)
    cfg = _config_from_args(args)
    run = _run_one(seq, regions, args.estimator, cfg)
    if all(e.contributing == 0 for e in run.epochs):
        print("estimation degenerate: every epoch was rejected", file=sys.stderr)
        return 1
    _write_run(run, args.out, args.estimator)
    print(f"wrote {len(run.samples)} samples to {os.path.join(args.out, 'ppg.csv')}")
    return 0


def _load_beats(path):
    times = []
    with open(path) as f:
        for line in f:
            line = line.strip()
            try:
                times.append(float(line))
            except ValueError:
                continue
    return np.array(times)


def _evaluate_files(ppg_path, truth_path, beats_path=None):
    est = frameio.load_ground_truth(ppg_path)
    ref = frameio.load_ground_truth(truth_path)
    beats = None
    if beats_path is None:
        sibling = os.path.join(os.path.dirname(truth_path), "truth_beats.csv")
        if os.path.isfile(sibling):
            beats_path = sibling
    if beats_path is not None:
        beats = _load_beats(beats_path)
    return evaluation.evaluate_waveforms(
        est.samples,
        est.sample_rate,
        ref.samples,
        ref.sample_rate,
        t0_est=est.t0,
        t0_ref=ref.t0,
        ref_beat_times=beats,
    )


def cmd_evaluate(args):
    report = _evaluate_files(args.ppg, args.truth, args.beats)
    evaluation.write_report(report, args.out)
    print(f"snr {report.snr.snr_db:.2f} dB, ibi rmse {report.match.rmse_ms:.1f} ms, missing {report.match.missing_pct:.1f}%")
    return 0


def cmd_compare(args):
    seq, regions = _load_inputs(args.frames, args.regions)
    cfg = _config_from_args(args)
    truth_path = os.path.join(args.truth_dir, "truth_ppg.csv")
    beats_path = os.path.join(args.truth_dir, "truth_beats.csv")
    ref = frameio.load_ground_truth(truth_path)
    beats = _load_beats(beats_path) if os.path.isfile(beats_path) else None
    os.makedirs(args.out, exist_ok=True)

    results = {}
    for name in ("distanceppg", "face_average"):
        run = _run_one(seq, regions, name, cfg)
        report = evaluation.evaluate_waveforms(
            run.samples, run.fps, ref.samples, ref.sample_rate, ref_beat_times=beats
        )
        results[name] = (run, report)
        _write_run(run, os.path.join(args.out, name), name)
        evaluation.write_report(report, os.path.join(args.out, name))

    rows = []
    for metric, getter in [
        ("snr_db", lambda r: r[1].snr.snr_db),
        ("pr_mae_bpm", lambda r: float(np.mean(r[1].pr_abs_error()))),
        ("ibi_rmse_ms", lambda r: r[1].match.rmse_ms),
        ("missing_pct", lambda r: r[1].match.missing_pct),
        ("gate_fraction", lambda r: r[0].gate_fraction()),
    ]:
        a = getter(results["distanceppg"])
        b = getter(results["face_average"])
        rows.append((metric, a, b, a - b))
    _write_csv(
        os.path.join(args.out, "comparison.csv"),
        ["metric", "distanceppg", "face_average", "delta"],
        rows,
    )
    run_a = results["distanceppg"][0]
    run_b = results["face_average"][0]
    t_grid = np.arange(len(run_a.samples)) / run_a.fps
    truth_fps = evaluation.dsp.spline_eval(ref.samples, ref.sample_rate, t_grid)
    _write_csv(
        os.path.join(args.out, "plotready.csv"),
        ["time_s", "distanceppg", "face_average", "truth"],
        list(zip(t_grid, run_a.samples, run_b.samples, truth_fps)),
    )
    for metric, a, b, d in rows:
        print(f"{metric:>14}: distanceppg {a:10.3f}  face_average {b:10.3f}  delta {d:+.3f}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(prog="pulsecam", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a synthetic scene with ground truth")
    p.add_argument("scene", help="preset name or scene file")
    p.add_argument("out", help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="extract the pulse waveform from frames")
    p.add_argument("--frames", required=True, help="frame sequence directory")
    p.add_argument("--regions", required=True, help="region polygon file")
    p.add_argument("--out", required=True)
    p.add_argument("--estimator", choices=["distanceppg", "face_average"], default="distanceppg")
    _add_config_flags(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="score an estimate against a reference")
    p.add_argument("--ppg", required=True, help="estimated waveform CSV")
    p.add_argument("--truth", required=True, help="reference waveform CSV")
    p.add_argument("--beats", default=None, help="reference beat times CSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="run both estimators head to head")
    p.add_argument("--frames", required=True)
    p.add_argument("--regions", required=True)
    p.add_argument("--truth-dir", required=True)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (frameio.FormatError, simulator.SceneError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
