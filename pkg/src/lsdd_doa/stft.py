"""Multichannel short-time Fourier analysis and operating-band selection.

One-sided spectra only. Frames never wrap or zero-pad: a signal of length
N yields floor((N - nfft) / hop) + 1 frames and the trailing partial frame
is dropped, which keeps frame/interval alignment deterministic.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .errors import BandError, FormatError, InputTooShortError, ParameterError

WINDOW_KINDS = ("hann", "rect")

_MAGIC = "LSDDTF"
_VERSION = 1


def _window(kind: str, nfft: int) -> np.ndarray:
    if kind == "hann":
        # periodic Hann, the standard choice for hop = nfft/2 analysis
        return 0.5 - 0.5 * np.cos(2.0 * np.pi * np.arange(nfft) / nfft)
    if kind == "rect":
        return np.ones(nfft)
    raise ParameterError(f"unknown window kind {kind!r}, expected one of {WINDOW_KINDS}")


@dataclass(frozen=True)
class STFTTensor:
    """Complex STFT values indexed [mic m][time frame t][frequency bin f]."""

    values: np.ndarray  # (M, T, F) complex
    sample_rate_hz: float
    nfft: int
    hop: int
    window_kind: str = "hann"

    def __post_init__(self):
        vals = np.asarray(self.values)
        if vals.ndim != 3:
            raise ParameterError("STFT values must be (M, T, F)")
        if vals.shape[2] != self.nfft // 2 + 1:
            raise ParameterError("frequency axis must hold nfft/2 + 1 one-sided bins")
        object.__setattr__(self, "values", vals)

    @property
    def num_mics(self) -> int:
        return self.values.shape[0]

    @property
    def num_frames(self) -> int:
        return self.values.shape[1]

    @property
    def num_bins(self) -> int:
        return self.values.shape[2]

    @property
    def bin_freqs_hz(self) -> np.ndarray:
        return np.arange(self.num_bins) * self.sample_rate_hz / self.nfft

    @property
    def frame_times_s(self) -> np.ndarray:
        """Center time of each frame in seconds."""
        starts = np.arange(self.num_frames) * self.hop
        return (starts + self.nfft / 2.0) / self.sample_rate_hz


def analyze(
    signals,
    sample_rate_hz: float,
    nfft: int = 1024,
    hop: int = 512,
    window_kind: str = "hann",
) -> STFTTensor:
    """One-sided STFT of a real [M][N] signal block.

    Defaults (nfft 1024, hop 512, Hann at 16 kHz) match the processing
    configuration used throughout the pipeline.
    """
    try:
        sig = np.asarray(signals, dtype=float)
    except ValueError as exc:
        raise ParameterError(f"channels must share one length: {exc}") from exc
    if sig.ndim == 1:
        sig = sig[None, :]
    if sig.ndim != 2:
        raise ParameterError("signals must be a [M][N] array")
    if sig.dtype == object:
        raise ParameterError("channels must share one length")
    if hop < 1 or nfft < 2:
        raise ParameterError("need hop >= 1 and nfft >= 2")
    n = sig.shape[1]
    if n < nfft:
        raise InputTooShortError(f"signal length {n} is shorter than one frame ({nfft})")

    win = _window(window_kind, nfft)
    num_frames = (n - nfft) // hop + 1
    frames = np.lib.stride_tricks.sliding_window_view(sig, nfft, axis=1)[:, ::hop][:, :num_frames]
    values = np.fft.rfft(frames * win, axis=2)
    return STFTTensor(values, float(sample_rate_hz), nfft, hop, window_kind)


def save_stft_tensor(tensor: STFTTensor, path) -> None:
    """Write the STFT tensor container (companion to the steering file).

    Text header (magic+version, M, T, F, sample rate, nfft, hop, window,
    ``data`` marker) followed by the little-endian complex64 payload in
    [m][t][f] C order.
    """
    header = io.StringIO()
    header.write(f"{_MAGIC} {_VERSION}\n")
    header.write(f"M {tensor.num_mics}\nT {tensor.num_frames}\nF {tensor.num_bins}\n")
    header.write(f"sample_rate_hz {tensor.sample_rate_hz!r}\n")
    header.write(f"nfft {tensor.nfft}\nhop {tensor.hop}\nwindow {tensor.window_kind}\n")
    header.write("data\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("utf-8"))
        fh.write(np.ascontiguousarray(tensor.values.astype(np.complex64)).tobytes())


def load_stft_tensor(path) -> STFTTensor:
    """Read a tensor container written by :func:`save_stft_tensor`."""
    with open(path, "rb") as fh:
        magic = fh.readline().decode("utf-8", errors="replace").split()
        if len(magic) != 2 or magic[0] != _MAGIC:
            raise FormatError("not an STFT tensor container")
        if magic[1] != str(_VERSION):
            raise FormatError(f"unsupported tensor container version {magic[1]!r}")
        fields: dict[str, str] = {}
        for key in ("M", "T", "F", "sample_rate_hz", "nfft", "hop", "window"):
            raw = fh.readline()
            if not raw:
                raise FormatError(f"tensor container truncated while reading {key}")
            name, _, rest = raw.decode("utf-8", errors="replace").rstrip("\n").partition(" ")
            if name != key:
                raise FormatError(f"expected header field {key!r}, found {name!r}")
            fields[key] = rest
        if fh.readline().decode("utf-8", errors="replace").rstrip("\n") != "data":
            raise FormatError("missing 'data' marker before payload")
        try:
            m, t, f = int(fields["M"]), int(fields["T"]), int(fields["F"])
            rate = float(fields["sample_rate_hz"])
            nfft, hop = int(fields["nfft"]), int(fields["hop"])
        except ValueError as exc:
            raise FormatError(f"malformed tensor header: {exc}") from exc
        payload = fh.read()
        if len(payload) != m * t * f * 8:
            raise FormatError(
                f"payload holds {len(payload) // 8} complex values, expected {m * t * f}"
            )
        values = np.frombuffer(payload, dtype="<c8").reshape(m, t, f).astype(np.complex128)
    try:
        return STFTTensor(values, rate, nfft, hop, fields["window"])
    except ParameterError as exc:
        raise FormatError(f"invalid tensor container contents: {exc}") from exc


def band_indices(tensor: STFTTensor, f_low_hz: float, f_high_hz: float) -> range:
    """Contiguous frequency-bin range with f_low <= bin freq <= f_high."""
    nyquist = tensor.sample_rate_hz / 2.0
    if not (0 <= f_low_hz < f_high_hz <= nyquist):
        raise BandError(
            f"need 0 <= f_low < f_high <= Nyquist ({nyquist} Hz), got [{f_low_hz}, {f_high_hz}]"
        )
    freqs = tensor.bin_freqs_hz
    inside = np.nonzero((freqs >= f_low_hz) & (freqs <= f_high_hz))[0]
    if inside.size == 0:
        raise BandError(f"no STFT bins inside [{f_low_hz}, {f_high_hz}] Hz")
    return range(int(inside[0]), int(inside[-1]) + 1)
