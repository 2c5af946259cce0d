"""End-to-end estimation: tensor -> spectra -> valid bins -> clusters.

Frames are processed in chunks with a smoothing halo, so memory stays
bounded for long sessions while the output is identical to whole-session
processing. Within each active interval the valid room-frame estimates
are clustered with K+1 subtractive iterations.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .arraymodel import DirectionGrid, SteeringVectorSet
from .clustering import ClusterResult, cluster_interval
from .config import PipelineConfig
from .errors import ParameterError
from .segmentation import IntervalRecord, to_room_frame
from .spectrum import _steering_band_indices, peak_directions
from .stft import STFTTensor, band_indices
from .udm import UDM, build_udm


@dataclass(frozen=True)
class IntervalEstimate:
    """Clusters and valid-bin bookkeeping for one interval."""

    record: IntervalRecord
    clusters: list[ClusterResult]
    extra_weight: float
    valid_bin_count: int
    valid_thetas_deg: np.ndarray
    valid_frame_times_s: np.ndarray


@dataclass(frozen=True)
class SessionEstimate:
    """run_estimation output for one session."""

    intervals: list[IntervalEstimate]
    config: PipelineConfig
    band: range
    grid: DirectionGrid
    duration_s: float


def prepare_udm(tensor: STFTTensor, steering: SteeringVectorSet, config: PipelineConfig) -> UDM:
    """Build the reliability map over the tensor's operating band."""
    band = band_indices(tensor, config.f_low_hz, config.f_high_hz)
    freqs = tensor.bin_freqs_hz[list(band)]
    sv_band = steering.select_freqs(_steering_band_indices(steering, freqs))
    return build_udm(
        sv_band,
        thr=config.udm_threshold,
        delta_near_deg=config.delta_near_deg,
        delta_far_deg=config.delta_far_deg,
        rank_scope=config.rank_scope,
        band=band,
    )


def _check_udm(udm: UDM, band: range, band_freqs: np.ndarray, grid: DirectionGrid) -> None:
    if udm.xi_map.shape[0] != len(grid):
        raise ParameterError("reliability map grid does not match the steering grid")
    if udm.band is not None and (udm.band.start != band.start or udm.band.stop != band.stop):
        raise ParameterError(
            f"reliability map band [{udm.band.start}, {udm.band.stop}) does not match "
            f"the configured band [{band.start}, {band.stop})"
        )
    if udm.xi_map.shape[1] != band_freqs.size or not np.allclose(
        udm.freqs_hz, band_freqs, rtol=1e-6, atol=1e-3
    ):
        raise ParameterError("reliability map frequencies do not match the operating band")


def run_estimation(
    tensor: STFTTensor,
    steering: SteeringVectorSet,
    intervals: list[IntervalRecord],
    config: PipelineConfig,
    udm: UDM | None = None,
    yaw_of_time=None,
) -> SessionEstimate:
    """Estimate per-interval DOAs for every active interval of a session.

    ``intervals`` must be 0-aligned back-to-back records (as produced by
    segment_intervals). ``yaw_of_time`` maps a frame time to the array
    yaw; None means the array frame equals the room frame.
    """
    if steering.num_mics != tensor.num_mics:
        raise ParameterError("steering set and tensor disagree on microphone count")
    band = band_indices(tensor, config.f_low_hz, config.f_high_hz)
    band_freqs = tensor.bin_freqs_hz[list(band)]
    grid = steering.grid
    sv_cols = _steering_band_indices(steering, band_freqs)
    steering_band = np.ascontiguousarray(steering.values[:, sv_cols, :])

    if config.weight_mode == "new":
        if udm is None:
            udm = prepare_udm(tensor, steering, config)
        _check_udm(udm, band, band_freqs, grid)
        xi_map = udm.xi_map
    else:
        xi_map = None

    frame_times = tensor.frame_times_s
    num_frames = frame_times.size
    yaws = (
        np.array([float(yaw_of_time(t)) for t in frame_times])
        if yaw_of_time is not None
        else np.zeros(num_frames)
    )
    dt = config.interval_ms / 1000.0
    frame_interval = np.floor(frame_times / dt).astype(np.int64)
    frame_interval[(frame_interval < 0) | (frame_interval >= len(intervals))] = -1

    r_t = config.smoothing_rt // 2
    r_f = config.smoothing_rf // 2
    az = grid.azimuths_deg

    bucket_theta: dict[int, list[np.ndarray]] = {}
    bucket_w: dict[int, list[np.ndarray]] = {}
    bucket_t: dict[int, list[np.ndarray]] = {}

    for core_start in range(0, num_frames, config.chunk_frames):
        core_stop = min(num_frames, core_start + config.chunk_frames)
        lo = max(0, core_start - r_t)
        hi = min(num_frames, core_stop + r_t)
        X = np.ascontiguousarray(
            np.transpose(tensor.values[:, lo:hi, band.start : band.stop], (1, 2, 0))
        )
        S, degenerate = _kernels.directional_spectrum_block(X, steering_band)
        if config.smoothing_rt > 1 or config.smoothing_rf > 1:
            S = _kernels.box_smooth(S, r_t, r_f)
        core = slice(core_start - lo, core_stop - lo)
        dir_idx, xi = peak_directions(S[core])
        valid = (xi >= config.dpd_threshold) & ~degenerate[core]

        t_sel, f_sel = np.nonzero(valid)
        if t_sel.size == 0:
            continue
        frames = core_start + t_sel
        phi = az[dir_idx[t_sel, f_sel]]
        theta = to_room_frame(phi, yaws[frames])
        if xi_map is None:
            w = np.ones(t_sel.size)
        else:
            w = xi_map[dir_idx[t_sel, f_sel], f_sel] * xi[t_sel, f_sel]
        targets = frame_interval[frames]
        for iv in np.unique(targets):
            if iv < 0:
                continue
            pick = targets == iv
            bucket_theta.setdefault(int(iv), []).append(theta[pick])
            bucket_w.setdefault(int(iv), []).append(w[pick])
            bucket_t.setdefault(int(iv), []).append(frame_times[frames[pick]])

    out: list[IntervalEstimate] = []
    for record in intervals:
        thetas = np.concatenate(bucket_theta.get(record.index, [np.empty(0)]))
        weights = np.concatenate(bucket_w.get(record.index, [np.empty(0)]))
        times = np.concatenate(bucket_t.get(record.index, [np.empty(0)]))
        clusters: list[ClusterResult] = []
        extra = 0.0
        if record.active and record.num_speakers >= 1 and thetas.size > 0:
            clusters, extra = cluster_interval(
                zip(thetas, weights),
                record.num_speakers,
                window_half_width_deg=config.cluster_window_deg,
                q_cap=config.q_cap,
                uniform_quality=config.quality_mode == "base",
            )
        out.append(
            IntervalEstimate(
                record=record,
                clusters=clusters,
                extra_weight=extra,
                valid_bin_count=int(thetas.size),
                valid_thetas_deg=thetas,
                valid_frame_times_s=times,
            )
        )
    duration = intervals[-1].end_s if intervals else float(frame_times[-1]) if num_frames else 0.0
    return SessionEstimate(out, config, band, grid, duration)
