"""Directional spectrum, smoothing, and per-bin DOA/DPD estimation.

Every time-frequency snapshot x(t,f) is scored against each candidate
steering vector with the cosine similarity d = |<a,b>| / (||a|| ||b||).
The per-bin DOA is the argmax direction of the (smoothed) spectrum, the
direct-path-dominance value is its maximum, and a bin is valid when that
maximum reaches the threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .arraymodel import DirectionGrid, SteeringVectorSet
from .errors import DegenerateInputError, ParameterError
from .stft import STFTTensor


@dataclass(frozen=True)
class SpectrumTensor:
    """Directional spectrum values [time frame][in-band bin][direction].

    ``band`` maps the second axis back to absolute STFT bin indices.
    ``degenerate`` marks all-zero snapshots; their rows are zero and they
    are skipped by :func:`estimate_bins`.
    """

    values: np.ndarray  # (T, F_band, L) float in [0, 1]
    grid: DirectionGrid
    band: range
    degenerate: np.ndarray  # (T, F_band) bool

    def __post_init__(self):
        if self.values.ndim != 3:
            raise ParameterError("spectrum values must be (T, F_band, L)")
        if self.values.shape[2] != len(self.grid):
            raise ParameterError("spectrum direction axis does not match grid")
        if self.values.shape[1] != len(self.band):
            raise ParameterError("spectrum frequency axis does not match band")


@dataclass
class BinEstimate:
    """Per-(t,f) DOA estimate with its direct-path-dominance score.

    ``theta_hat_deg`` (room frame) is filled by the pipeline once the
    array yaw is known; ``w`` is filled by the reliability weighting.
    """

    t: int
    f: int  # absolute STFT bin index
    phi_hat_deg: float  # array frame
    xi: float
    valid: bool
    theta_hat_deg: float | None = None
    w: float = 1.0


def cosine_similarity(a, b) -> float:
    """|<a, b>| / (||a|| ||b||), in [0, 1]; invariant to complex scaling."""
    a = np.asarray(a, dtype=complex).ravel()
    b = np.asarray(b, dtype=complex).ravel()
    na = np.linalg.norm(a)
    nb = np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise DegenerateInputError("cosine similarity of a zero-norm vector is undefined")
    return min(1.0, float(np.abs(np.vdot(a, b))) / (na * nb))


def directional_spectrum(x_tf, steering_slice) -> np.ndarray:
    """Similarity of one snapshot against L steering vectors at one frequency.

    ``steering_slice`` is (L, M). A zero-norm snapshot yields the all-zero
    vector rather than raising: silent bins are routine and are skipped
    downstream (no direction can pass a positive validity threshold).
    """
    x = np.asarray(x_tf, dtype=complex).ravel()
    V = np.atleast_2d(np.asarray(steering_slice, dtype=complex))
    if V.shape[1] != x.size:
        raise ParameterError("steering slice and snapshot disagree on microphone count")
    vnorm = np.linalg.norm(V, axis=1)
    if np.any(vnorm == 0.0):
        raise DegenerateInputError("steering slice contains a zero-norm vector")
    xn = np.linalg.norm(x)
    if xn == 0.0:
        return np.zeros(V.shape[0])
    S = np.abs(V.conj() @ x) / (vnorm * xn)
    np.clip(S, 0.0, 1.0, out=S)
    return S


def _steering_band_indices(sv: SteeringVectorSet, freqs_hz: np.ndarray) -> np.ndarray:
    """Match each wanted frequency to a steering frequency sample."""
    idx = np.searchsorted(sv.freqs_hz, freqs_hz)
    idx = np.clip(idx, 0, sv.freqs_hz.size - 1)
    left = np.clip(idx - 1, 0, sv.freqs_hz.size - 1)
    pick = np.where(
        np.abs(sv.freqs_hz[left] - freqs_hz) <= np.abs(sv.freqs_hz[idx] - freqs_hz), left, idx
    )
    err = np.abs(sv.freqs_hz[pick] - freqs_hz)
    tol = 1e-6 * max(1.0, float(np.max(freqs_hz)))
    if np.any(err > tol):
        worst = int(np.argmax(err))
        raise ParameterError(
            f"steering set has no sample at {freqs_hz[worst]:.6g} Hz "
            f"(closest is {sv.freqs_hz[pick[worst]]:.6g} Hz)"
        )
    return pick


def compute_spectrum(
    tensor: STFTTensor, steering: SteeringVectorSet, band: range
) -> SpectrumTensor:
    """Directional spectrum of every in-band bin of an STFT tensor."""
    if steering.num_mics != tensor.num_mics:
        raise ParameterError("steering set and tensor disagree on microphone count")
    freqs = tensor.bin_freqs_hz[list(band)]
    sv_idx = _steering_band_indices(steering, freqs)
    V = np.ascontiguousarray(steering.values[:, sv_idx, :])
    X = np.ascontiguousarray(np.transpose(tensor.values[:, :, band.start : band.stop], (1, 2, 0)))
    S, degenerate = _kernels.directional_spectrum_block(X, V)
    return SpectrumTensor(S, steering.grid, band, degenerate)


def smooth_spectrum(spec: SpectrumTensor, r_t_frames: int, r_f_bins: int) -> SpectrumTensor:
    """Box-average the spectrum over an R_t x R_f time-frequency window.

    R values are the full (odd) window widths; R_t = R_f = 1 is the
    identity. Windows shrink at the tensor edges and are normalized by
    the actual neighbor count.
    """
    _check_window(r_t_frames, r_f_bins)
    if r_t_frames == 1 and r_f_bins == 1:
        return spec
    out = _kernels.box_smooth(spec.values, r_t_frames // 2, r_f_bins // 2)
    return SpectrumTensor(out, spec.grid, spec.band, spec.degenerate)


def _check_window(r_t: int, r_f: int) -> None:
    for name, r in (("R_t", r_t), ("R_f", r_f)):
        if r < 1 or r % 2 == 0:
            raise ParameterError(f"{name} must be an odd positive window width, got {r}")


def peak_directions(values: np.ndarray):
    """Argmax direction index and peak value along the direction axis.

    Ties break to the lowest direction index (np.argmax's rule).
    """
    idx = np.argmax(values, axis=-1)
    peak = np.take_along_axis(values, idx[..., None], axis=-1)[..., 0]
    return idx, peak


def estimate_bins(
    smoothed: SpectrumTensor, grid: DirectionGrid, validity_threshold: float
) -> list[BinEstimate]:
    """Per-bin DOA, DPD value and validity flag from a smoothed spectrum.

    Degenerate (all-zero) bins are skipped entirely.
    """
    if not 0.0 <= validity_threshold <= 1.0:
        raise ParameterError("validity threshold must be in [0, 1]")
    idx, xi = peak_directions(smoothed.values)
    az = grid.azimuths_deg
    start = smoothed.band.start
    out: list[BinEstimate] = []
    degenerate = smoothed.degenerate
    for t in range(smoothed.values.shape[0]):
        for j in range(smoothed.values.shape[1]):
            if degenerate[t, j]:
                continue
            v = float(xi[t, j])
            out.append(
                BinEstimate(
                    t=t,
                    f=start + j,
                    phi_hat_deg=float(az[idx[t, j]]),
                    xi=v,
                    valid=v >= validity_threshold,
                )
            )
    return out
