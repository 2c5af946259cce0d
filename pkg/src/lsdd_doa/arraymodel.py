"""Microphone array geometry, direction grids and steering-vector sets.

A steering vector v(phi, f) is the complex response of the M microphones
to a unit plane wave arriving from azimuth phi at frequency f. Sets are
either generated analytically (far-field free space) or loaded from the
documented container file for measured arrays.

Sign convention (fixed here, shared by simulation and estimation):
azimuth phi points *toward* the source, u(phi) = (cos phi, sin phi, 0) in
the array frame, and

    v_m(phi, f) = exp(+j * 2*pi*f * (r_m . u(phi)) / c)

i.e. a microphone displaced toward the source leads the origin in phase.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from .angles import circ_diff_deg, wrap_deg
from .errors import FormatError, ParameterError

SPEED_OF_SOUND = 343.0  # m/s, default; configurable everywhere it appears

_MAGIC = "LSDDSV"
_VERSION = 1


@dataclass(frozen=True)
class ArrayGeometry:
    """Microphone positions in meters, in the array frame.

    ``axis_reference`` documents which way azimuth 0 points (always the
    +x axis in this package; the field exists so loaded geometries can
    carry their own note).
    """

    mic_positions: np.ndarray  # (M, 3)
    label: str = "array"
    axis_reference: str = "+x"

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.mic_positions, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ParameterError("mic_positions must be an (M, 3) array of meters")
        if pos.shape[0] < 1:
            raise ParameterError("need at least one microphone")
        if not np.all(np.isfinite(pos)):
            raise ParameterError("mic positions must be finite")
        if pos.shape[0] > 1:
            d = np.linalg.norm(pos[:, None, :] - pos[None, :, :], axis=2)
            np.fill_diagonal(d, np.inf)
            if np.any(d == 0.0):
                raise ParameterError("two microphones share a position")
        object.__setattr__(self, "mic_positions", pos)

    @property
    def num_mics(self) -> int:
        return self.mic_positions.shape[0]


def ring_geometry(num_mics: int, radius_m: float, label: str = "ring") -> ArrayGeometry:
    """Uniform circular array in the horizontal plane, first mic on +x."""
    if num_mics < 1 or radius_m <= 0:
        raise ParameterError("ring geometry needs num_mics >= 1 and radius > 0")
    ang = 2.0 * np.pi * np.arange(num_mics) / num_mics
    pos = np.stack([radius_m * np.cos(ang), radius_m * np.sin(ang), np.zeros(num_mics)], axis=1)
    return ArrayGeometry(pos, label=f"{label}:{num_mics}:{radius_m:g}")


def line_geometry(num_mics: int, spacing_m: float, label: str = "line") -> ArrayGeometry:
    """Uniform linear array along +x, centered on the origin."""
    if num_mics < 1 or spacing_m <= 0:
        raise ParameterError("line geometry needs num_mics >= 1 and spacing > 0")
    x = (np.arange(num_mics) - (num_mics - 1) / 2.0) * spacing_m
    pos = np.stack([x, np.zeros(num_mics), np.zeros(num_mics)], axis=1)
    return ArrayGeometry(pos, label=f"{label}:{num_mics}:{spacing_m:g}")


@dataclass(frozen=True)
class DirectionGrid:
    """Sorted azimuth grid over (-180, +180] degrees."""

    azimuths_deg: np.ndarray
    resolution_deg: float

    def __post_init__(self):
        az = np.asarray(self.azimuths_deg, dtype=float)
        if az.ndim != 1 or az.size < 1:
            raise ParameterError("grid needs at least one azimuth")
        if np.any(np.diff(az) <= 0):
            raise ParameterError("grid azimuths must be strictly increasing")
        if az[0] <= -180.0 or az[-1] > 180.0:
            raise ParameterError("grid azimuths must lie in (-180, +180]")
        object.__setattr__(self, "azimuths_deg", az)

    def __len__(self) -> int:
        return self.azimuths_deg.size

    def nearest_index(self, azimuth_deg: float) -> int:
        """Index of the grid direction circularly closest to ``azimuth_deg``.

        Ties go to the lower index.
        """
        return int(np.argmin(circ_diff_deg(self.azimuths_deg, azimuth_deg)))


def build_direction_grid(resolution_deg: float) -> DirectionGrid:
    """Uniform azimuth grid covering (-180, +180] at a nominal spacing.

    L = round(360 / resolution); the actual spacing 360/L is stored so the
    grid always closes exactly at +180 even for resolutions that do not
    divide 360.
    """
    if not np.isfinite(resolution_deg) or resolution_deg <= 0 or resolution_deg > 90:
        raise ParameterError("grid resolution must be in (0, 90] degrees")
    count = int(round(360.0 / resolution_deg))
    spacing = 360.0 / count
    azimuths = -180.0 + spacing * np.arange(1, count + 1)
    azimuths[-1] = 180.0  # exact upper edge
    return DirectionGrid(azimuths, spacing)


@dataclass(frozen=True)
class SteeringVectorSet:
    """Complex array responses indexed [direction l][frequency bin][mic m]."""

    values: np.ndarray  # (L, F, M) complex
    freqs_hz: np.ndarray  # (F,)
    grid: DirectionGrid
    geometry_label: str = "array"

    def __post_init__(self):
        vals = np.asarray(self.values)
        freqs = np.asarray(self.freqs_hz, dtype=float)
        if vals.ndim != 3:
            raise ParameterError("steering values must be (L, F, M)")
        if vals.shape[0] != len(self.grid):
            raise ParameterError("steering direction count does not match grid")
        if vals.shape[1] != freqs.size:
            raise ParameterError("steering frequency count does not match freqs_hz")
        bad = _first_zero_norm(vals)
        if bad is not None:
            raise ParameterError(
                f"steering vector at direction {bad[0]}, frequency bin {bad[1]} has zero norm"
            )
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "freqs_hz", freqs)

    @property
    def num_mics(self) -> int:
        return self.values.shape[2]

    def select_freqs(self, indices) -> "SteeringVectorSet":
        """Subset along the frequency axis (e.g. restrict to a band)."""
        idx = np.asarray(indices, dtype=int)
        return SteeringVectorSet(
            self.values[:, idx, :], self.freqs_hz[idx], self.grid, self.geometry_label
        )


def _first_zero_norm(values: np.ndarray):
    norms = np.linalg.norm(values, axis=2)
    zero = np.argwhere(norms == 0.0)
    if zero.size:
        return int(zero[0, 0]), int(zero[0, 1])
    return None


def free_field_steering(
    geometry: ArrayGeometry,
    grid: DirectionGrid,
    freqs_hz,
    c: float = SPEED_OF_SOUND,
) -> SteeringVectorSet:
    """Far-field plane-wave steering vectors for ``geometry`` on ``grid``.

    All entries have unit magnitude; a microphone at the origin has
    response exactly 1 for every direction and frequency, as does any
    microphone at f = 0.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    if freqs.ndim != 1 or freqs.size == 0:
        raise ParameterError("freqs_hz must be a nonempty 1-D sequence")
    if np.any(freqs < 0) or not np.all(np.isfinite(freqs)):
        raise ParameterError("frequencies must be finite and nonnegative")
    if len(grid) == 0:
        raise ParameterError("direction grid is empty")
    if not np.isfinite(c) or c <= 0:
        raise ParameterError("speed of sound must be positive")

    az = np.deg2rad(grid.azimuths_deg)
    u = np.stack([np.cos(az), np.sin(az), np.zeros_like(az)], axis=1)  # (L, 3)
    delay = geometry.mic_positions @ u.T / c  # (M, L): time lead toward the source
    phase = 2.0 * np.pi * freqs[None, :, None] * delay.T[:, None, :]  # (L, F, M)
    return SteeringVectorSet(np.exp(1j * phase), freqs, grid, geometry.label)


def save_steering_set(sv: SteeringVectorSet, path) -> None:
    """Write the documented steering container.

    Layout: text header (magic+version, label, M, L, F, grid line, freqs
    line, literal ``data`` line), then the raw little-endian complex64
    payload in [l][f][m] C order.
    """
    L, F, M = sv.values.shape
    header = io.StringIO()
    header.write(f"{_MAGIC} {_VERSION}\n")
    header.write(f"label {sv.geometry_label}\n")
    header.write(f"M {M}\nL {L}\nF {F}\n")
    header.write("grid " + " ".join(repr(float(a)) for a in sv.grid.azimuths_deg) + "\n")
    header.write("freqs " + " ".join(repr(float(f)) for f in sv.freqs_hz) + "\n")
    header.write("data\n")
    payload = np.ascontiguousarray(sv.values.astype(np.complex64)).tobytes()
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("utf-8"))
        fh.write(payload)


def _read_header_line(fh, what: str) -> str:
    raw = fh.readline()
    if not raw:
        raise FormatError(f"steering container truncated while reading {what}")
    return raw.decode("utf-8", errors="replace").rstrip("\n")


def load_steering_set(path) -> SteeringVectorSet:
    """Read a steering container written by :func:`save_steering_set`.

    Values are upcast to complex128; saving again reproduces the file
    byte for byte.
    """
    with open(path, "rb") as fh:
        magic = _read_header_line(fh, "magic")
        parts = magic.split()
        if len(parts) != 2 or parts[0] != _MAGIC:
            raise FormatError(f"bad magic line {magic!r}, expected '{_MAGIC} <version>'")
        if parts[1] != str(_VERSION):
            raise FormatError(f"unsupported steering container version {parts[1]!r}")

        fields: dict[str, str] = {}
        for key in ("label", "M", "L", "F", "grid", "freqs"):
            line = _read_header_line(fh, key)
            name, _, rest = line.partition(" ")
            if name != key:
                raise FormatError(f"expected header field {key!r}, found {name!r}")
            fields[key] = rest
        if _read_header_line(fh, "data marker") != "data":
            raise FormatError("missing 'data' marker before payload")

        try:
            M, L, F = (int(fields[k]) for k in ("M", "L", "F"))
            grid_vals = np.array([float(v) for v in fields["grid"].split()])
            freqs = np.array([float(v) for v in fields["freqs"].split()])
        except ValueError as exc:
            raise FormatError(f"malformed numeric header field: {exc}") from exc
        if grid_vals.size != L:
            raise FormatError(f"grid list has {grid_vals.size} entries, header says L={L}")
        if freqs.size != F:
            raise FormatError(f"freqs list has {freqs.size} entries, header says F={F}")

        payload = fh.read()
        expected = L * F * M * 8  # complex64
        if len(payload) != expected:
            raise FormatError(
                f"payload holds {len(payload) // 8} complex values, expected {L * F * M}"
            )
        values = np.frombuffer(payload, dtype="<c8").reshape(L, F, M).astype(np.complex128)

    bad = _first_zero_norm(values)
    if bad is not None:
        raise FormatError(
            f"steering vector at direction {bad[0]}, frequency bin {bad[1]} has zero norm"
        )
    resolution = 360.0 / L if L > 1 else 360.0
    try:
        grid = DirectionGrid(grid_vals, resolution)
        return SteeringVectorSet(values, freqs, grid, fields["label"])
    except ParameterError as exc:
        raise FormatError(f"invalid steering container contents: {exc}") from exc
