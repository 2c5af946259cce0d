"""Synthetic STFT-domain scenes with moving sources and exact ground truth.

Under the multiplicative transfer-function assumption each snapshot is

    x(t, f) = sum_k s_k(t, f) * v(psi_k(t) - yaw(t), f) + n(t, f)

so synthesis happens directly in the time-frequency domain: a noiseless
single-source scene satisfies x = s * v exactly, which makes end-to-end
recovery tests exact. Source azimuths are snapped to the nearest grid
direction (the rendered value is what the truth records).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .angles import unwrap_near_deg, wrap_deg
from .arraymodel import ArrayGeometry, DirectionGrid, free_field_steering, SPEED_OF_SOUND
from .errors import ConfigError, ParameterError
from .segmentation import IntervalRecord, merge_spans, segment_intervals
from .stft import STFTTensor

SIGNAL_KINDS = ("modulated-noise", "tone-comb")


@dataclass(frozen=True)
class Trajectory:
    """Piecewise-linear azimuth vs. time with circular unwrapping.

    Consecutive keyframes are connected along the shorter arc; sampling
    exactly at a keyframe returns that keyframe's azimuth exactly.
    """

    times_s: np.ndarray
    azimuths_deg: np.ndarray
    _unwrapped: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times_s, dtype=float)
        a = np.asarray(self.azimuths_deg, dtype=float)
        if t.ndim != 1 or t.size == 0 or t.shape != a.shape:
            raise ParameterError("trajectory needs matching 1-D times and azimuths")
        if np.any(np.diff(t) <= 0):
            raise ParameterError("trajectory times must be strictly increasing")
        if np.any(a <= -180.0) or np.any(a > 180.0) or not np.all(np.isfinite(a)):
            raise ParameterError("trajectory azimuths must lie in (-180, +180]")
        unwrapped = a.copy()
        for i in range(1, a.size):
            unwrapped[i] = unwrap_near_deg(a[i], unwrapped[i - 1])
        object.__setattr__(self, "times_s", t)
        object.__setattr__(self, "azimuths_deg", a)
        object.__setattr__(self, "_unwrapped", unwrapped)

    @classmethod
    def constant(cls, azimuth_deg: float) -> "Trajectory":
        return cls(np.array([0.0]), np.array([float(azimuth_deg)]))

    @classmethod
    def from_keyframes(cls, keyframes) -> "Trajectory":
        pairs = [(float(t), float(a)) for t, a in keyframes]
        return cls(np.array([p[0] for p in pairs]), np.array([p[1] for p in pairs]))

    def sample(self, t_s: float) -> float:
        """Azimuth at time t (degrees in (-180, +180])."""
        times = self.times_s
        if times.size == 1:
            return float(self.azimuths_deg[0])
        if t_s < times[0] or t_s > times[-1]:
            raise ParameterError(
                f"time {t_s} outside trajectory range [{times[0]}, {times[-1]}]"
            )
        pos = int(np.searchsorted(times, t_s))
        if pos < times.size and times[pos] == t_s:
            return float(self.azimuths_deg[pos])
        i = pos - 1
        frac = (t_s - times[i]) / (times[i + 1] - times[i])
        value = self._unwrapped[i] + frac * (self._unwrapped[i + 1] - self._unwrapped[i])
        return float(wrap_deg(value))

    def sample_clamped(self, t_s: float) -> float:
        """Like :meth:`sample` but holds the end values outside the range."""
        t = min(max(t_s, float(self.times_s[0])), float(self.times_s[-1]))
        return self.sample(t)


def sample_trajectory(traj: Trajectory, t_s: float) -> float:
    return traj.sample(t_s)


@dataclass(frozen=True)
class SourceSpec:
    """One far-field source: where it is, what it emits, when it talks."""

    trajectory: Trajectory
    signal_kind: str = "modulated-noise"
    level_db: float = 0.0
    active_intervals: tuple[tuple[float, float], ...] | None = None  # None = always on
    comb_step: int = 4  # tone-comb only: every Nth bin carries energy

    def __post_init__(self):
        if self.signal_kind not in SIGNAL_KINDS:
            raise ParameterError(f"signal kind must be one of {SIGNAL_KINDS}")
        if self.comb_step < 1:
            raise ParameterError("comb step must be >= 1")
        if self.active_intervals is not None:
            spans = tuple((float(a), float(b)) for a, b in self.active_intervals)
            for a, b in spans:
                if b <= a:
                    raise ParameterError("active interval must have positive length")
            object.__setattr__(self, "active_intervals", spans)


@dataclass(frozen=True)
class SceneSpec:
    """Scene description: sources, array yaw, noise, duration, seed."""

    duration_s: float
    sources: tuple[SourceSpec, ...] = ()
    array_yaw: Trajectory = field(default_factory=lambda: Trajectory.constant(0.0))
    snr_db: float = float("inf")
    noise_level_db: float | None = None  # absolute per-bin level; overrides snr_db
    rng_seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.duration_s) or self.duration_s <= 0:
            raise ParameterError("scene duration must be positive")
        object.__setattr__(self, "sources", tuple(self.sources))
        if not self.sources and self.noise_level_db is None and not np.isfinite(self.snr_db):
            raise ParameterError("a scene needs sources or a noise field")
        for traj in [s.trajectory for s in self.sources] + [self.array_yaw]:
            if traj.times_s.size > 1 and (
                traj.times_s[0] > 0.0 or traj.times_s[-1] < self.duration_s
            ):
                raise ParameterError("trajectories must cover [0, duration]")


@dataclass(frozen=True)
class SceneTruth:
    """Frame-aligned ground truth emitted alongside the synthetic tensor."""

    frame_times_s: np.ndarray  # (T,)
    speaker_ids: tuple[str, ...]
    source_azimuths_deg: np.ndarray  # (K, T) rendered room-frame azimuths
    array_yaw_deg: np.ndarray  # (T,)
    activity: dict[str, list[tuple[float, float]]]
    intervals: list[IntervalRecord]
    interval_ms: float
    duration_s: float
    rng_seed: int


def _active_frame_mask(source: SourceSpec, frame_times: np.ndarray, duration: float) -> np.ndarray:
    spans = source.active_intervals
    if spans is None:
        spans = ((0.0, duration),)
    mask = np.zeros(frame_times.size, dtype=bool)
    for a, b in spans:
        mask |= (frame_times >= a) & (frame_times < b)
    return mask


def _source_amplitudes(
    source: SourceSpec, rng: np.random.Generator, num_frames: int, num_bins: int
) -> np.ndarray:
    sigma = 10.0 ** (source.level_db / 20.0)
    if source.signal_kind == "modulated-noise":
        re = rng.standard_normal((num_frames, num_bins))
        im = rng.standard_normal((num_frames, num_bins))
        return sigma / np.sqrt(2.0) * (re + 1j * im)
    s = np.zeros((num_frames, num_bins), dtype=complex)
    s[:, :: source.comb_step] = sigma
    return s


def synthesize_stft(
    spec: SceneSpec,
    geometry: ArrayGeometry,
    grid: DirectionGrid,
    sample_rate_hz: float = 16000.0,
    nfft: int = 1024,
    hop: int = 512,
    interval_ms: float = 500.0,
    snr_band_hz: tuple[float, float] = (1500.0, 3500.0),
    c: float = SPEED_OF_SOUND,
):
    """Render a scene into an STFT tensor plus its exact truth.

    The SNR is the ratio of total active source power to total noise
    power counted over ``snr_band_hz``; the noise itself is white over
    all bins. Deterministic for a fixed spec (seed included).
    """
    num_samples = int(round(spec.duration_s * sample_rate_hz))
    if num_samples < nfft:
        raise ParameterError("scene too short for a single STFT frame")
    num_frames = (num_samples - nfft) // hop + 1
    num_bins = nfft // 2 + 1
    frame_times = (np.arange(num_frames) * hop + nfft / 2.0) / sample_rate_hz
    bin_freqs = np.arange(num_bins) * sample_rate_hz / nfft
    in_band = (bin_freqs >= snr_band_hz[0]) & (bin_freqs <= snr_band_hz[1])

    steering = free_field_steering(geometry, grid, bin_freqs, c=c)
    num_mics = geometry.num_mics
    rng = np.random.default_rng(spec.rng_seed)

    values = np.zeros((num_mics, num_frames, num_bins), dtype=complex)
    yaw = np.array([spec.array_yaw.sample(t) for t in frame_times])
    rendered = np.zeros((len(spec.sources), num_frames))
    source_band_power = 0.0

    for k, source in enumerate(spec.sources):
        active = _active_frame_mask(source, frame_times, spec.duration_s)
        amplitudes = _source_amplitudes(source, rng, num_frames, num_bins)
        amplitudes[~active] = 0.0
        room_az = np.array([source.trajectory.sample(t) for t in frame_times])
        array_az = wrap_deg(room_az - yaw)
        dir_idx = np.array([grid.nearest_index(a) for a in array_az])
        rendered[k] = wrap_deg(grid.azimuths_deg[dir_idx] + yaw)
        # (T, F, M): per-frame steering gathered by the snapped direction
        v_frames = steering.values[dir_idx]
        values += np.transpose(amplitudes[:, :, None] * v_frames, (2, 0, 1))
        sigma_sq = 10.0 ** (source.level_db / 10.0)
        if source.signal_kind == "tone-comb":
            bins_in_band = int(in_band[:: source.comb_step].sum())
        else:
            bins_in_band = int(in_band.sum())
        source_band_power += sigma_sq * active.sum() * bins_in_band * num_mics

    noise_var = 0.0
    if spec.noise_level_db is not None:
        noise_var = 10.0 ** (spec.noise_level_db / 10.0)
    elif np.isfinite(spec.snr_db):
        if source_band_power == 0.0:
            raise ParameterError("snr_db given but the scene has no active source power")
        total_noise = source_band_power / 10.0 ** (spec.snr_db / 10.0)
        noise_var = total_noise / (num_mics * num_frames * in_band.sum())
    if noise_var > 0.0:
        re = rng.standard_normal(values.shape)
        im = rng.standard_normal(values.shape)
        values += np.sqrt(noise_var / 2.0) * (re + 1j * im)

    speaker_ids = tuple(f"s{k}" for k in range(len(spec.sources)))
    activity = {
        sid: merge_spans(
            src.active_intervals if src.active_intervals is not None else [(0.0, spec.duration_s)]
        )
        for sid, src in zip(speaker_ids, spec.sources)
    }
    intervals = segment_intervals(
        activity,
        spec.duration_s,
        interval_ms,
        yaw_of_time=spec.array_yaw.sample,
    )
    tensor = STFTTensor(values, float(sample_rate_hz), nfft, hop, "hann")
    truth = SceneTruth(
        frame_times_s=frame_times,
        speaker_ids=speaker_ids,
        source_azimuths_deg=rendered,
        array_yaw_deg=yaw,
        activity=activity,
        intervals=intervals,
        interval_ms=interval_ms,
        duration_s=spec.duration_s,
        rng_seed=spec.rng_seed,
    )
    return tensor, truth


# ---------------------------------------------------------------------------
# scene configuration files (JSON)


def _trajectory_from_cfg(value, what: str) -> Trajectory:
    try:
        if isinstance(value, (int, float)):
            return Trajectory.constant(float(value))
        return Trajectory.from_keyframes(value)
    except (TypeError, ValueError, ParameterError) as exc:
        raise ConfigError(f"bad {what} trajectory: {exc}") from exc


def scene_from_dict(cfg: dict) -> SceneSpec:
    if not isinstance(cfg, dict):
        raise ConfigError("scene config must be a JSON object")
    known = {"duration_s", "sources", "array_yaw", "snr_db", "noise_level_db", "rng_seed"}
    unknown = set(cfg) - known
    if unknown:
        raise ConfigError(f"unknown scene config keys: {sorted(unknown)}")
    try:
        sources = []
        for i, src in enumerate(cfg.get("sources", [])):
            src_known = {"trajectory", "signal_kind", "level_db", "active", "comb_step"}
            bad = set(src) - src_known
            if bad:
                raise ConfigError(f"unknown source keys: {sorted(bad)}")
            sources.append(
                SourceSpec(
                    trajectory=_trajectory_from_cfg(src["trajectory"], f"source {i}"),
                    signal_kind=src.get("signal_kind", "modulated-noise"),
                    level_db=float(src.get("level_db", 0.0)),
                    active_intervals=(
                        tuple((float(a), float(b)) for a, b in src["active"])
                        if src.get("active") is not None
                        else None
                    ),
                    comb_step=int(src.get("comb_step", 4)),
                )
            )
        return SceneSpec(
            duration_s=float(cfg["duration_s"]),
            sources=tuple(sources),
            array_yaw=_trajectory_from_cfg(cfg.get("array_yaw", 0.0), "array yaw"),
            snr_db=float(cfg.get("snr_db", float("inf"))),
            noise_level_db=(
                float(cfg["noise_level_db"]) if cfg.get("noise_level_db") is not None else None
            ),
            rng_seed=int(cfg.get("rng_seed", 0)),
        )
    except KeyError as exc:
        raise ConfigError(f"scene config missing key: {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad scene config value: {exc}") from exc
    except ParameterError as exc:
        raise ConfigError(str(exc)) from exc


def load_scene(path) -> SceneSpec:
    """Read a scene configuration (JSON) from disk."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"scene config is not valid JSON: {exc}") from exc
    return scene_from_dict(cfg)
