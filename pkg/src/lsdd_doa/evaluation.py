"""Scoring final DOA estimates against ground truth and emitting reports.

Clusters are matched to the true active speakers of their interval by the
assignment minimizing total circular error (speaker counts are small, so
exhaustive matching is exact). Accuracy and robustness are summarized by
quality-ranked subset curves: for each P, the mean absolute error and the
outlier fraction of the P% rows with the highest quality.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from itertools import permutations
from pathlib import Path

import numpy as np

from .angles import circ_diff_deg
from .config import PipelineConfig, config_to_dict
from .errors import FormatError, ParameterError
from .pipeline import IntervalEstimate, SessionEstimate
from .segmentation import dynamic_percentage_table

P_LATTICE = tuple(range(10, 101, 10))
DYNAMIC_TABLE_INTERVALS_MS = (100.0, 300.0, 500.0, 1000.0, 5000.0)
DYNAMIC_TABLE_ZETAS_DEG = (3.0, 5.0, 7.0, 10.0)


@dataclass(frozen=True)
class EvalRow:
    """One (interval, cluster) final estimate with its scored error."""

    interval_index: int
    mid_time_s: float
    k: int
    theta_hat_deg: float
    quality: float
    weight: float
    valid_bin_count: int
    psi_deg: float | None = None
    error_deg: float | None = None


@dataclass(frozen=True)
class EvalReport:
    rows: list[EvalRow]
    curves: dict
    pr: float | None
    n_low_mean: float | None
    miss_count: int
    active_interval_count: int
    intervals_with_estimates: int
    dynamic_table: dict
    config: PipelineConfig


def _assign_clusters(thetas: list[float], psis: list[float]):
    """Injective cluster->speaker matching minimizing total circular error.

    Returns a list of speaker indices per cluster. Exhaustive search;
    deterministic tie-break by enumeration order.
    """
    if len(thetas) > len(psis):
        raise ParameterError("cannot match more clusters than speakers")
    best = None
    best_cost = np.inf
    for perm in permutations(range(len(psis)), len(thetas)):
        cost = sum(float(circ_diff_deg(t, psis[p])) for t, p in zip(thetas, perm))
        if cost < best_cost:
            best_cost = cost
            best = perm
    return list(best) if best is not None else []


def _interval_low_error_fraction(
    est: IntervalEstimate, psi_of_time: dict[str, callable], threshold_deg: float
) -> float | None:
    if est.valid_bin_count == 0:
        return None
    times = est.valid_frame_times_s
    uniq, inv = np.unique(times, return_inverse=True)
    best = np.full(times.size, np.inf)
    for sid in est.record.speaker_ids:
        psi = np.array([psi_of_time[sid](t) for t in uniq])
        err = circ_diff_deg(est.valid_thetas_deg, psi[inv])
        best = np.minimum(best, err)
    if not np.isfinite(best).all():
        return None
    return float(np.mean(best <= threshold_deg))


def evaluate(session: SessionEstimate, trajectories: dict, config: PipelineConfig | None = None):
    """Score a session against room-frame truth trajectories.

    ``trajectories`` maps speaker id to an object with sample_clamped(t).
    """
    cfg = config or session.config
    rows: list[EvalRow] = []
    miss_count = 0
    active = 0
    with_estimates = 0
    low_fractions = []
    psi_of_time = {sid: traj.sample_clamped for sid, traj in trajectories.items()}

    for est in session.intervals:
        rec = est.record
        if not rec.active:
            continue
        active += 1
        if est.valid_bin_count > 0:
            with_estimates += 1
        for sid in rec.speaker_ids:
            if sid not in psi_of_time:
                raise ParameterError(f"truth has no trajectory for active speaker {sid!r}")
        frac = _interval_low_error_fraction(est, psi_of_time, cfg.low_error_threshold_deg)
        if frac is not None:
            low_fractions.append(frac)

        defined = [c for c in est.clusters if c.theta_hat_deg is not None]
        psis = [psi_of_time[sid](rec.mid_time_s) for sid in rec.speaker_ids]
        matched = _assign_clusters([c.theta_hat_deg for c in defined], psis)
        miss_count += rec.num_speakers - len(defined)
        for cluster, speaker_idx in zip(defined, matched):
            psi = psis[speaker_idx]
            rows.append(
                EvalRow(
                    interval_index=rec.index,
                    mid_time_s=rec.mid_time_s,
                    k=cluster.k,
                    theta_hat_deg=cluster.theta_hat_deg,
                    quality=cluster.quality,
                    weight=cluster.weight,
                    valid_bin_count=est.valid_bin_count,
                    psi_deg=float(psi),
                    error_deg=float(circ_diff_deg(cluster.theta_hat_deg, psi)),
                )
            )

    curves = subset_curves(
        np.array([r.error_deg for r in rows]),
        np.array([r.quality for r in rows]),
        cfg.quality_mode,
        cfg.outlier_threshold_deg,
    )
    table = dynamic_percentage_table(
        trajectories,
        session.duration_s,
        [ms for ms in DYNAMIC_TABLE_INTERVALS_MS if ms / 1000.0 <= session.duration_s],
        DYNAMIC_TABLE_ZETAS_DEG,
    )
    return EvalReport(
        rows=rows,
        curves=curves,
        pr=(with_estimates / active) if active else None,
        n_low_mean=float(np.mean(low_fractions)) if low_fractions else None,
        miss_count=miss_count,
        active_interval_count=active,
        intervals_with_estimates=with_estimates,
        dynamic_table=table,
        config=cfg,
    )


def selection_order(errors: np.ndarray, qualities: np.ndarray, quality_mode: str) -> np.ndarray:
    """Row order used to pick the best-P% subsets.

    base: stable input order (all qualities are 1); new: descending
    quality, stable on ties; ideal: ascending true error (oracle).
    """
    if quality_mode == "base":
        return np.arange(errors.size)
    if quality_mode == "new":
        return np.argsort(-qualities, kind="stable")
    if quality_mode == "ideal":
        return np.argsort(errors, kind="stable")
    raise ParameterError(f"unknown quality mode {quality_mode!r}")


def subset_curves(
    errors: np.ndarray, qualities: np.ndarray, quality_mode: str, outlier_threshold_deg: float
) -> dict:
    """Mean error and outlier fraction of the best-P% subsets, P in 10..100."""
    order = selection_order(errors, qualities, quality_mode)
    mean_curve = []
    outlier_curve = []
    n = errors.size
    for p in P_LATTICE:
        size = int(np.floor(n * p / 100.0 + 0.5))
        if size == 0:
            mean_curve.append(None)
            outlier_curve.append(None)
            continue
        subset = errors[order[:size]]
        mean_curve.append(float(np.mean(subset)))
        outlier_curve.append(float(np.mean(subset > outlier_threshold_deg)))
    return {"P": list(P_LATTICE), "mean_error": mean_curve, "outlier_fraction": outlier_curve}


# ---------------------------------------------------------------------------
# report files

_ROW_FIELDS = (
    "interval_index",
    "mid_time_s",
    "k",
    "theta_hat_deg",
    "quality",
    "weight",
    "valid_bin_count",
    "psi_deg",
    "error_deg",
)

_INTERVAL_FIELDS = (
    "interval_index",
    "start_s",
    "end_s",
    "mid_time_s",
    "active",
    "num_speakers",
    "speaker_ids",
    "delta_array_deg",
    "valid_bin_count",
    "extra_weight",
)


def emit_report(report: EvalReport, out_dir, session: SessionEstimate | None = None) -> dict:
    """Write estimates.csv (+ intervals.csv with a session) and summary.json.

    Output is deterministic: rerunning an identical configuration yields
    byte-identical files.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {}

    rows_path = out / "estimates.csv"
    with open(rows_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_ROW_FIELDS)
        for r in report.rows:
            writer.writerow(
                [
                    r.interval_index,
                    repr(r.mid_time_s),
                    r.k,
                    repr(r.theta_hat_deg),
                    repr(r.quality),
                    repr(r.weight),
                    r.valid_bin_count,
                    "" if r.psi_deg is None else repr(r.psi_deg),
                    "" if r.error_deg is None else repr(r.error_deg),
                ]
            )
    paths["estimates"] = rows_path

    if session is not None:
        iv_path = out / "intervals.csv"
        with open(iv_path, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(_INTERVAL_FIELDS)
            for est in session.intervals:
                rec = est.record
                writer.writerow(
                    [
                        rec.index,
                        repr(rec.start_s),
                        repr(rec.end_s),
                        repr(rec.mid_time_s),
                        int(rec.active),
                        rec.num_speakers,
                        ";".join(rec.speaker_ids),
                        repr(rec.delta_array_deg),
                        est.valid_bin_count,
                        repr(est.extra_weight),
                    ]
                )
        paths["intervals"] = iv_path

    summary = {
        "config": config_to_dict(report.config),
        "row_count": len(report.rows),
        "active_interval_count": report.active_interval_count,
        "intervals_with_estimates": report.intervals_with_estimates,
        "pr": report.pr,
        "n_low_mean": report.n_low_mean,
        "miss_count": report.miss_count,
        "curves": report.curves,
        "dynamic_table": {
            f"{int(ms)}": {f"{z:g}": pct for z, pct in zetas.items()}
            for ms, zetas in report.dynamic_table.items()
        },
    }
    summary_path = out / "summary.json"
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    paths["summary"] = summary_path
    return paths


def load_estimates_csv(path):
    """Read back estimates.csv rows (psi/error columns are ignored)."""
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != _ROW_FIELDS:
            raise FormatError(f"{path}: not an estimates.csv file")
        for rec in reader:
            try:
                rows.append(
                    EvalRow(
                        interval_index=int(rec[0]),
                        mid_time_s=float(rec[1]),
                        k=int(rec[2]),
                        theta_hat_deg=float(rec[3]),
                        quality=float(rec[4]),
                        weight=float(rec[5]),
                        valid_bin_count=int(rec[6]),
                    )
                )
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}: malformed row {rec!r}: {exc}") from exc
    return rows


def load_intervals_csv(path):
    """Read back intervals.csv: (IntervalRecord-like dicts in index order)."""
    out = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != _INTERVAL_FIELDS:
            raise FormatError(f"{path}: not an intervals.csv file")
        for rec in reader:
            try:
                out.append(
                    {
                        "interval_index": int(rec[0]),
                        "start_s": float(rec[1]),
                        "end_s": float(rec[2]),
                        "mid_time_s": float(rec[3]),
                        "active": bool(int(rec[4])),
                        "num_speakers": int(rec[5]),
                        "speaker_ids": tuple(s for s in rec[6].split(";") if s),
                        "delta_array_deg": float(rec[7]),
                        "valid_bin_count": int(rec[8]),
                        "extra_weight": float(rec[9]),
                    }
                )
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}: malformed row {rec!r}: {exc}") from exc
    return out


def rescore(
    est_rows: list[EvalRow],
    interval_rows: list[dict],
    trajectories: dict,
    config: PipelineConfig,
    duration_s: float,
) -> EvalReport:
    """Re-score persisted estimates against truth (per-bin metrics excluded).

    Reproduces assignment, errors, curves, Pr and misses from the emitted
    CSV files; the per-bin low-error fraction needs the original bins and
    is reported as None.
    """
    psi_of_time = {sid: traj.sample_clamped for sid, traj in trajectories.items()}
    by_interval: dict[int, list[EvalRow]] = {}
    for row in est_rows:
        by_interval.setdefault(row.interval_index, []).append(row)

    rows: list[EvalRow] = []
    miss_count = 0
    active = 0
    with_estimates = 0
    for iv in interval_rows:
        if not iv["active"]:
            continue
        active += 1
        if iv["valid_bin_count"] > 0:
            with_estimates += 1
        group = sorted(by_interval.get(iv["interval_index"], []), key=lambda r: r.k)
        for sid in iv["speaker_ids"]:
            if sid not in psi_of_time:
                raise ParameterError(f"truth has no trajectory for active speaker {sid!r}")
        psis = [psi_of_time[sid](iv["mid_time_s"]) for sid in iv["speaker_ids"]]
        matched = _assign_clusters([r.theta_hat_deg for r in group], psis)
        miss_count += iv["num_speakers"] - len(group)
        for row, speaker_idx in zip(group, matched):
            psi = psis[speaker_idx]
            rows.append(
                EvalRow(
                    interval_index=row.interval_index,
                    mid_time_s=row.mid_time_s,
                    k=row.k,
                    theta_hat_deg=row.theta_hat_deg,
                    quality=row.quality,
                    weight=row.weight,
                    valid_bin_count=row.valid_bin_count,
                    psi_deg=float(psi),
                    error_deg=float(circ_diff_deg(row.theta_hat_deg, psi)),
                )
            )

    curves = subset_curves(
        np.array([r.error_deg for r in rows]),
        np.array([r.quality for r in rows]),
        config.quality_mode,
        config.outlier_threshold_deg,
    )
    table = dynamic_percentage_table(
        trajectories,
        duration_s,
        [ms for ms in DYNAMIC_TABLE_INTERVALS_MS if ms / 1000.0 <= duration_s],
        DYNAMIC_TABLE_ZETAS_DEG,
    )
    return EvalReport(
        rows=rows,
        curves=curves,
        pr=(with_estimates / active) if active else None,
        n_low_mean=None,
        miss_count=miss_count,
        active_interval_count=active,
        intervals_with_estimates=with_estimates,
        dynamic_table=table,
        config=config,
    )
