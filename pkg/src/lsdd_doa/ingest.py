"""Session inputs: multichannel WAV audio and pose/VAD metadata files.

The pose/VAD file is line-delimited text, one record per line:

    time_s speaker_id azimuth_deg active_flag

``speaker_id`` is any token without whitespace; the reserved id ``array``
carries the array yaw (its active flag is ignored). ``#`` starts a
comment. Records of one id must be in strictly increasing time order.
An active flag of 1 holds from its timestamp until the speaker's next
record (or the end of the timeline).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import decimate

from .errors import FormatError, ParameterError
from .scene import Trajectory
from .segmentation import merge_spans

logger = logging.getLogger(__name__)

TARGET_RATE_HZ = 16000
SUPPORTED_RATES = (16000, 48000)
ARRAY_ID = "array"
GAP_WARN_FACTOR = 5.0  # warn when a record gap exceeds this times the median spacing

_INT_SCALES = {np.dtype(np.int16): 2**15, np.dtype(np.int32): 2**31}


def ingest_wav(path, expected_mics: int | None = None):
    """Read a multichannel WAV as float [M][N] at 16 kHz.

    48 kHz input is anti-alias low-pass filtered and decimated 3:1; any
    other rate is rejected. Integer PCM is scaled to [-1, 1).
    """
    try:
        rate, data = wavfile.read(path)
    except ValueError as exc:
        raise FormatError(f"cannot parse WAV file {path}: {exc}") from exc
    if rate not in SUPPORTED_RATES:
        raise FormatError(f"unsupported sample rate {rate} Hz, expected one of {SUPPORTED_RATES}")
    if data.ndim == 1:
        data = data[:, None]
    signals = data.T.astype(np.float64)
    if data.dtype in _INT_SCALES:
        signals /= _INT_SCALES[data.dtype]
    elif data.dtype == np.uint8:
        signals = (signals - 128.0) / 128.0
    if expected_mics is not None and signals.shape[0] != expected_mics:
        raise ParameterError(
            f"WAV has {signals.shape[0]} channels, array geometry expects {expected_mics}"
        )
    if rate == 48000:
        signals = decimate(signals, 3, axis=1, zero_phase=True)
    return signals, TARGET_RATE_HZ


@dataclass(frozen=True)
class SessionMeta:
    """Parsed pose/VAD metadata: who is where, when they speak, array yaw."""

    trajectories: dict[str, Trajectory]  # room-frame azimuth per speaker
    activity: dict[str, list[tuple[float, float]]]
    array_yaw: Trajectory
    t_max_s: float

    @property
    def speaker_ids(self) -> tuple[str, ...]:
        return tuple(sorted(self.trajectories))


def parse_pose_vad(path) -> SessionMeta:
    """Parse the documented pose/VAD line format."""
    times: dict[str, list[float]] = {}
    azimuths: dict[str, list[float]] = {}
    flags: dict[str, list[int]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            parts = text.split()
            if len(parts) != 4:
                raise FormatError(
                    f"{path}:{lineno}: expected 'time_s speaker_id azimuth_deg active_flag'"
                )
            try:
                t = float(parts[0])
                az = float(parts[2])
                flag = int(parts[3])
            except ValueError as exc:
                raise FormatError(f"{path}:{lineno}: {exc}") from exc
            if flag not in (0, 1):
                raise FormatError(f"{path}:{lineno}: active flag must be 0 or 1")
            sid = parts[1]
            prev = times.get(sid)
            if prev and t <= prev[-1]:
                raise FormatError(
                    f"{path}:{lineno}: out-of-order timestamp {t} for id {sid!r}"
                )
            times.setdefault(sid, []).append(t)
            azimuths.setdefault(sid, []).append(az)
            flags.setdefault(sid, []).append(flag)

    if not times:
        return SessionMeta({}, {}, Trajectory.constant(0.0), 0.0)
    t_max = max(ts[-1] for ts in times.values())

    trajectories: dict[str, Trajectory] = {}
    activity: dict[str, list[tuple[float, float]]] = {}
    for sid, ts in times.items():
        _warn_on_gaps(path, sid, ts)
        try:
            traj = Trajectory.from_keyframes(zip(ts, azimuths[sid]))
        except ParameterError as exc:
            raise FormatError(f"{path}: bad records for id {sid!r}: {exc}") from exc
        if sid == ARRAY_ID:
            array_yaw = traj
            continue
        trajectories[sid] = traj
        spans = []
        for i, flag in enumerate(flags[sid]):
            if flag == 1:
                end = ts[i + 1] if i + 1 < len(ts) else t_max
                if end > ts[i]:
                    spans.append((ts[i], end))
        activity[sid] = merge_spans(spans)
    if ARRAY_ID not in times:
        array_yaw = Trajectory.constant(0.0)
    return SessionMeta(trajectories, activity, array_yaw, t_max)


def _warn_on_gaps(path, sid: str, ts: list[float]) -> None:
    if len(ts) < 3:
        return
    gaps = np.diff(ts)
    median = float(np.median(gaps))
    if median > 0 and float(gaps.max()) > GAP_WARN_FACTOR * median:
        logger.warning(
            "%s: id %r has a %.3f s gap between records (median spacing %.3f s); "
            "interpolating linearly across it",
            path,
            sid,
            float(gaps.max()),
            median,
        )


def write_pose_vad(path, meta_rows) -> None:
    """Write pose/VAD records; rows are (time_s, id, azimuth_deg, flag)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("# time_s speaker_id azimuth_deg active_flag\n")
        for t, sid, az, flag in meta_rows:
            fh.write(f"{t!r} {sid} {az!r} {int(flag)}\n")
