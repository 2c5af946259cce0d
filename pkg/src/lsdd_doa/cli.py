"""Command-line interface.

Subcommands:

    simulate   render a synthetic scene to a tensor + metadata + truth
    udm        precompute a reliability-map cache from a steering file
    estimate   run the estimation pipeline on audio/tensor + metadata
    evaluate   re-score previously emitted estimates against metadata
    sweep      rerun estimation over a parameter range, tabulate summaries

Exit codes: 0 success, 2 configuration/parameter error, 3 file format
error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .arraymodel import (
    ArrayGeometry,
    build_direction_grid,
    line_geometry,
    load_steering_set,
    ring_geometry,
    save_steering_set,
    free_field_steering,
)
from .config import PipelineConfig, config_from_items, config_to_dict, load_config
from .errors import ConfigError, FormatError, LsddError, ParameterError
from .evaluation import (
    emit_report,
    evaluate,
    load_estimates_csv,
    load_intervals_csv,
    rescore,
)
from .ingest import ingest_wav, parse_pose_vad, write_pose_vad
from .pipeline import prepare_udm, run_estimation
from .scene import Trajectory, load_scene, synthesize_stft
from .segmentation import segment_intervals
from .stft import analyze, band_indices, load_stft_tensor, save_stft_tensor
from .udm import build_udm, load_udm, save_udm


def _geometry_from_spec(spec: str) -> ArrayGeometry:
    parts = spec.split(":")
    try:
        if parts[0] == "ring" and len(parts) == 3:
            return ring_geometry(int(parts[1]), float(parts[2]))
        if parts[0] == "line" and len(parts) == 3:
            return line_geometry(int(parts[1]), float(parts[2]))
    except ValueError as exc:
        raise ConfigError(f"bad array spec {spec!r}: {exc}") from exc
    raise ConfigError(f"unknown array spec {spec!r}, expected ring:M:radius or line:M:spacing")


def _config_from_args(args) -> PipelineConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else PipelineConfig()
    overrides = {}
    for item in getattr(args, "set", None) or []:
        key, eq, value = item.partition("=")
        if not eq:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        overrides[key.strip()] = value.strip()
    return config_from_items(overrides, cfg)


def _padded_trajectory(times: np.ndarray, values: np.ndarray, duration: float) -> Trajectory:
    t = list(map(float, times))
    v = list(map(float, values))
    if t[0] > 0.0:
        t.insert(0, 0.0)
        v.insert(0, v[0])
    if t[-1] < duration:
        t.append(duration)
        v.append(v[-1])
    return Trajectory(np.array(t), np.array(v))


def _flag_at(spans, t: float) -> int:
    return int(any(a <= t < b for a, b in spans))


def cmd_simulate(args) -> int:
    spec = load_scene(args.scene)
    geometry = _geometry_from_spec(args.array)
    grid = build_direction_grid(args.resolution)
    tensor, truth = synthesize_stft(
        spec,
        geometry,
        grid,
        sample_rate_hz=args.fs,
        nfft=args.nfft,
        hop=args.hop,
        interval_ms=args.interval_ms,
        c=args.c,
    )
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    save_stft_tensor(tensor, out / "scene_tensor.lsddtf")
    steering = free_field_steering(geometry, grid, tensor.bin_freqs_hz, c=args.c)
    save_steering_set(steering, out / "steering.lsddsv")

    # pose/VAD records: pose knots at every frame time plus exact activity
    # boundaries, so the file reconstructs both trajectories and spans.
    duration = spec.duration_s
    rows = []
    for k, sid in enumerate(truth.speaker_ids):
        traj = _padded_trajectory(truth.frame_times_s, truth.source_azimuths_deg[k], duration)
        spans = truth.activity[sid]
        knots = set(map(float, truth.frame_times_s)) | {0.0, duration}
        for a, b in spans:
            knots |= {float(a), float(b)}
        for t in sorted(knots):
            rows.append((t, sid, traj.sample_clamped(t), _flag_at(spans, t)))
    yaw_traj = _padded_trajectory(truth.frame_times_s, truth.array_yaw_deg, duration)
    for t in sorted(set(map(float, truth.frame_times_s)) | {0.0, duration}):
        rows.append((t, "array", yaw_traj.sample_clamped(t), 1))
    rows.sort(key=lambda r: (r[0], r[1]))
    write_pose_vad(out / "meta.posevad", rows)

    truth_doc = {
        "duration_s": truth.duration_s,
        "rng_seed": truth.rng_seed,
        "interval_ms": truth.interval_ms,
        "frame_times_s": [float(t) for t in truth.frame_times_s],
        "speaker_ids": list(truth.speaker_ids),
        "source_azimuths_deg": [[float(a) for a in row] for row in truth.source_azimuths_deg],
        "array_yaw_deg": [float(a) for a in truth.array_yaw_deg],
        "activity": {sid: [[a, b] for a, b in spans] for sid, spans in truth.activity.items()},
        "intervals": [
            {
                "index": r.index,
                "start_s": r.start_s,
                "end_s": r.end_s,
                "mid_time_s": r.mid_time_s,
                "active": r.active,
                "num_speakers": r.num_speakers,
                "speaker_ids": list(r.speaker_ids),
                "delta_array_deg": r.delta_array_deg,
            }
            for r in truth.intervals
        ],
    }
    with open(out / "truth.json", "w", encoding="utf-8") as fh:
        json.dump(truth_doc, fh, indent=2)
        fh.write("\n")
    print(f"simulate: wrote tensor, steering, meta.posevad and truth.json to {out}")
    return 0


def cmd_udm(args) -> int:
    steering = load_steering_set(args.steering)
    cfg = _config_from_args(args)
    in_band = np.nonzero(
        (steering.freqs_hz >= cfg.f_low_hz) & (steering.freqs_hz <= cfg.f_high_hz)
    )[0]
    if in_band.size == 0:
        raise ConfigError("steering set has no frequencies inside the configured band")
    sv_band = steering.select_freqs(in_band)
    band = range(
        int(round(sv_band.freqs_hz[0] * args.nfft / args.fs)),
        int(round(sv_band.freqs_hz[-1] * args.nfft / args.fs)) + 1,
    )
    udm = build_udm(
        sv_band,
        thr=cfg.udm_threshold,
        delta_near_deg=cfg.delta_near_deg,
        delta_far_deg=cfg.delta_far_deg,
        rank_scope=cfg.rank_scope,
        band=band if len(band) == in_band.size else None,
    )
    save_udm(udm, args.output)
    print(
        f"udm: {udm.xi_map.shape[0]} directions x {udm.xi_map.shape[1]} frequencies "
        f"-> {args.output}"
    )
    return 0


def _load_session_inputs(args, cfg: PipelineConfig):
    steering = load_steering_set(args.steering)
    audio = Path(args.audio)
    if audio.suffix.lower() == ".wav":
        signals, rate = ingest_wav(audio, expected_mics=steering.num_mics)
        tensor = analyze(signals, rate, nfft=args.nfft, hop=args.hop)
    else:
        tensor = load_stft_tensor(audio)
    meta = parse_pose_vad(args.meta)
    duration = max(meta.t_max_s, float(tensor.frame_times_s[-1]))
    intervals = segment_intervals(
        meta.activity,
        duration,
        cfg.interval_ms,
        yaw_of_time=meta.array_yaw.sample_clamped,
        trajectories=meta.trajectories,
        zeta_deg=cfg.zeta_deg,
    )
    return steering, tensor, meta, intervals


def _run_and_report(args, cfg: PipelineConfig, out_dir: Path):
    steering, tensor, meta, intervals = _load_session_inputs(args, cfg)
    udm = load_udm(args.udm) if getattr(args, "udm", None) else None
    session = run_estimation(
        tensor,
        steering,
        intervals,
        cfg,
        udm=udm,
        yaw_of_time=meta.array_yaw.sample_clamped,
    )
    report = evaluate(session, meta.trajectories)
    paths = emit_report(report, out_dir, session)
    return report, paths


def cmd_estimate(args) -> int:
    cfg = _config_from_args(args)
    report, paths = _run_and_report(args, cfg, Path(args.output))
    pr = "n/a" if report.pr is None else f"{report.pr:.3f}"
    print(
        f"estimate: {len(report.rows)} estimates over {report.active_interval_count} "
        f"active intervals (Pr={pr}) -> {paths['summary']}"
    )
    return 0


def cmd_evaluate(args) -> int:
    cfg = _config_from_args(args)
    est_dir = Path(args.estimates)
    est_rows = load_estimates_csv(est_dir / "estimates.csv")
    interval_rows = load_intervals_csv(est_dir / "intervals.csv")
    meta = parse_pose_vad(args.meta)
    duration = interval_rows[-1]["end_s"] if interval_rows else meta.t_max_s
    report = rescore(est_rows, interval_rows, meta.trajectories, cfg, duration)
    paths = emit_report(report, Path(args.output))
    print(f"evaluate: re-scored {len(report.rows)} estimates -> {paths['summary']}")
    return 0


def _parse_sweep(spec: str):
    name, eq, rng = spec.partition("=")
    parts = rng.split(":")
    if not eq or len(parts) != 3:
        raise ConfigError(f"--param expects key=start:step:stop, got {spec!r}")
    try:
        start, step, stop = (float(p) for p in parts)
    except ValueError as exc:
        raise ConfigError(f"bad sweep range {rng!r}: {exc}") from exc
    if step <= 0 or stop < start:
        raise ConfigError("sweep needs step > 0 and stop >= start")
    values = []
    v = start
    while v <= stop + 1e-12:
        values.append(round(v, 12))
        v += step
    return name.strip(), values


def cmd_sweep(args) -> int:
    base_cfg = _config_from_args(args)
    key, values = _parse_sweep(args.param)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)

    steering, tensor, meta, _ = _load_session_inputs(args, base_cfg)
    udm = load_udm(args.udm) if getattr(args, "udm", None) else None

    results = []
    header = f"{key:>12} {'rows':>6} {'Pr':>7} {'mean_err':>9} {'outliers':>9} {'n_low':>7}"
    print(header)
    print("-" * len(header))
    for value in values:
        cfg = config_from_items({key: repr(value)}, base_cfg)
        intervals = segment_intervals(
            meta.activity,
            max(meta.t_max_s, float(tensor.frame_times_s[-1])),
            cfg.interval_ms,
            yaw_of_time=meta.array_yaw.sample_clamped,
            trajectories=meta.trajectories,
            zeta_deg=cfg.zeta_deg,
        )
        session = run_estimation(
            tensor, steering, intervals, cfg, udm=udm, yaw_of_time=meta.array_yaw.sample_clamped
        )
        report = evaluate(session, meta.trajectories)
        mean_100 = report.curves["mean_error"][-1]
        out_100 = report.curves["outlier_fraction"][-1]
        results.append(
            {
                key: value,
                "row_count": len(report.rows),
                "pr": report.pr,
                "mean_error_100": mean_100,
                "outlier_fraction_100": out_100,
                "n_low_mean": report.n_low_mean,
            }
        )
        print(
            f"{value:>12g} {len(report.rows):>6d} "
            f"{'n/a' if report.pr is None else format(report.pr, '7.3f')} "
            f"{'n/a' if mean_100 is None else format(mean_100, '9.3f')} "
            f"{'n/a' if out_100 is None else format(out_100, '9.3f')} "
            f"{'n/a' if report.n_low_mean is None else format(report.n_low_mean, '7.3f')}"
        )
    with open(out / "sweep.json", "w", encoding="utf-8") as fh:
        json.dump({"param": key, "values": results, "config": config_to_dict(base_cfg)}, fh, indent=2)
        fh.write("\n")
    print(f"sweep: wrote {out / 'sweep.json'}")
    return 0


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument(
        "--set",
        action="append",
        metavar="KEY=VALUE",
        help="override a single configuration key (repeatable)",
    )


def _add_session_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--steering", required=True, help="steering container file")
    p.add_argument("--udm", help="reliability-map cache (skips recomputation)")
    p.add_argument("--audio", required=True, help="multichannel WAV or tensor container")
    p.add_argument("--meta", required=True, help="pose/VAD metadata file")
    p.add_argument("--nfft", type=int, default=1024)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("-o", "--output", required=True, help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lsdd-doa",
        description="Multi-speaker DOA estimation for moving microphone arrays",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="render a synthetic scene")
    p.add_argument("scene", help="scene configuration (JSON)")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--array", default="ring:6:0.05", help="ring:M:radius or line:M:spacing")
    p.add_argument("--resolution", type=float, default=1.0, help="grid resolution in degrees")
    p.add_argument("--fs", type=float, default=16000.0)
    p.add_argument("--nfft", type=int, default=1024)
    p.add_argument("--hop", type=int, default=512)
    p.add_argument("--interval-ms", type=float, default=500.0)
    p.add_argument("--c", type=float, default=343.0, help="speed of sound in m/s")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("udm", help="precompute the reliability-map cache")
    p.add_argument("--steering", required=True)
    p.add_argument("-o", "--output", required=True, help="cache file to write")
    p.add_argument("--fs", type=float, default=16000.0)
    p.add_argument("--nfft", type=int, default=1024)
    _add_config_args(p)
    p.set_defaults(func=cmd_udm)

    p = sub.add_parser("estimate", help="run the estimation pipeline")
    _add_session_args(p)
    _add_config_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("evaluate", help="re-score emitted estimates")
    p.add_argument("--estimates", required=True, help="directory with estimates/intervals CSVs")
    p.add_argument("--meta", required=True, help="pose/VAD metadata file")
    p.add_argument("-o", "--output", required=True, help="output directory")
    _add_config_args(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="rerun estimation over a parameter range")
    p.add_argument("--param", required=True, metavar="KEY=START:STEP:STOP")
    _add_session_args(p)
    _add_config_args(p)
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FormatError as exc:
        print(f"format error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    except LsddError as exc:  # any other library error counts as parameter misuse
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
