"""Time-axis segmentation into fixed intervals and motion classification.

The session is cut into back-to-back intervals of length delta_T aligned
to t = 0 (a trailing partial interval is dropped). An interval is active
only when at least one speaker is vocal throughout the *entire* interval;
those speakers define K. An interval is dynamic when some ground-truth
trajectory changes by strictly more than zeta degrees between its
endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .angles import circ_diff_deg, wrap_deg
from .errors import ParameterError


@dataclass(frozen=True)
class IntervalRecord:
    """One delta_T slice of the session, labeled by its mid-time."""

    index: int
    start_s: float
    end_s: float
    mid_time_s: float
    active: bool
    num_speakers: int
    speaker_ids: tuple[str, ...]
    delta_array_deg: float = 0.0
    dynamic: bool | None = None


def merge_spans(spans) -> list[tuple[float, float]]:
    """Union of possibly-overlapping (start, end) activity spans."""
    cleaned = sorted((float(a), float(b)) for a, b in spans if b > a)
    out: list[tuple[float, float]] = []
    for a, b in cleaned:
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def _covers(spans, start: float, end: float) -> bool:
    return any(a <= start and b >= end for a, b in spans)


def segment_intervals(
    activity: dict[str, list[tuple[float, float]]],
    duration_s: float,
    interval_ms: float = 500.0,
    yaw_of_time=None,
    trajectories: dict[str, object] | None = None,
    zeta_deg: float | None = None,
) -> list[IntervalRecord]:
    """Cut [0, duration] into delta_T intervals with activity and K.

    ``activity`` maps speaker id to activity spans (merged internally).
    ``yaw_of_time`` optionally fills the array yaw at each mid-time;
    ``trajectories`` (objects with .sample(t), room frame) together with
    ``zeta_deg`` optionally fill the dynamic flag.
    """
    if interval_ms <= 0:
        raise ParameterError("interval length must be positive")
    if duration_s <= 0:
        raise ParameterError("duration must be positive")
    dt = interval_ms / 1000.0
    count = int(np.floor(duration_s / dt + 1e-9))
    merged = {sid: merge_spans(spans) for sid, spans in activity.items()}

    records = []
    for i in range(count):
        start = i * dt
        end = (i + 1) * dt
        speakers = tuple(sorted(sid for sid, spans in merged.items() if _covers(spans, start, end)))
        dynamic = None
        if trajectories is not None and zeta_deg is not None:
            dynamic = any(
                float(circ_diff_deg(traj.sample(end), traj.sample(start))) > zeta_deg
                for traj in trajectories.values()
            )
        mid = start + dt / 2.0
        records.append(
            IntervalRecord(
                index=i,
                start_s=start,
                end_s=end,
                mid_time_s=mid,
                active=len(speakers) > 0,
                num_speakers=len(speakers),
                speaker_ids=speakers,
                delta_array_deg=float(yaw_of_time(mid)) if yaw_of_time is not None else 0.0,
                dynamic=dynamic,
            )
        )
    return records


def to_room_frame(phi_hat_deg, delta_array_deg):
    """Array-frame to room-frame azimuth: wrap(phi_hat + delta_array)."""
    return wrap_deg(np.asarray(phi_hat_deg, dtype=float) + delta_array_deg)


def classify_dynamic(trajectories, duration_s: float, interval_ms: float, zeta_deg: float) -> float:
    """Percentage of intervals whose trajectory change strictly exceeds zeta.

    Change is the circular difference between a trajectory's values at the
    interval endpoints; an interval is dynamic when any trajectory moves.
    """
    if zeta_deg <= 0:
        raise ParameterError("zeta must be positive")
    dt = interval_ms / 1000.0
    count = int(np.floor(duration_s / dt + 1e-9))
    if count == 0:
        return 0.0
    trajs = list(trajectories.values()) if isinstance(trajectories, dict) else list(trajectories)
    dynamic = 0
    for i in range(count):
        start = i * dt
        end = (i + 1) * dt
        if any(float(circ_diff_deg(t.sample(end), t.sample(start))) > zeta_deg for t in trajs):
            dynamic += 1
    return 100.0 * dynamic / count


def dynamic_percentage_table(trajectories, duration_s: float, interval_ms_list, zeta_list):
    """Dynamic-interval percentages over a (delta_T, zeta) parameter lattice."""
    return {
        float(ms): {
            float(z): classify_dynamic(trajectories, duration_s, ms, z) for z in zeta_list
        }
        for ms in interval_ms_list
    }
