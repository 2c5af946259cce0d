"""Array-reliability weighting from steering-vector self-similarity.

The map scores every (look direction, frequency) cell of an array by how
sharply its steering vectors separate that direction from the rest of the
grid: high concentration of similarity near the look direction and few
distant sidelobes rank high. The normalized rank map is a pure function
of the steering set, independent of any scene, and multiplies the per-bin
direct-path-dominance value into the reliability weight

    w(t, f) = alpha(phi_hat, f) * xi(t, f).
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from . import _kernels
from .angles import circ_diff_deg
from .arraymodel import DirectionGrid, SteeringVectorSet
from .errors import FormatError, ParameterError

_MAGIC = "LSDDUDM"
_VERSION = 1

RANK_SCOPES = ("global", "per_look")


@dataclass(frozen=True)
class DirectivityTensor:
    """Pairwise steering similarity [look direction h][direction l][frequency]."""

    values: np.ndarray  # (L, L, F) in [0, 1], symmetric, unit diagonal
    grid: DirectionGrid
    freqs_hz: np.ndarray


@dataclass(frozen=True)
class UDM:
    """Normalized array-reliability map [look direction h][frequency] in [0, 1].

    ``band`` records the absolute STFT bin range the frequency axis was
    built from (None for standalone maps indexed by column).
    """

    xi_map: np.ndarray  # (L, F)
    thr: float
    delta_near_deg: float
    delta_far_deg: float
    grid: DirectionGrid
    freqs_hz: np.ndarray
    band: range | None = None
    rank_scope: str = "global"
    geometry_label: str = "array"

    def __post_init__(self):
        if self.xi_map.shape != (len(self.grid), np.asarray(self.freqs_hz).size):
            raise ParameterError("reliability map shape does not match grid x freqs")
        if np.any(self.xi_map < 0.0) or np.any(self.xi_map > 1.0):
            raise ParameterError("reliability map entries must lie in [0, 1]")

    def column_for_bin(self, f_bin: int) -> int:
        if self.band is None:
            if not 0 <= f_bin < self.xi_map.shape[1]:
                raise ParameterError(f"frequency column {f_bin} outside map")
            return f_bin
        if f_bin not in self.band:
            raise ParameterError(
                f"STFT bin {f_bin} outside the map's band [{self.band.start}, {self.band.stop - 1}]"
            )
        return f_bin - self.band.start


def compute_directivity(steering: SteeringVectorSet) -> DirectivityTensor:
    """Cosine similarity between every pair of steering directions per frequency."""
    lam = _kernels.directivity_matrix(steering.values)
    return DirectivityTensor(lam, steering.grid, steering.freqs_hz)


def binarize_directivity(directivity: DirectivityTensor, thr: float) -> np.ndarray:
    """Threshold the similarity tensor: 1 where strictly above ``thr``."""
    if not 0.0 < thr < 1.0:
        raise ParameterError(f"binarization threshold must be in (0, 1), got {thr}")
    return directivity.values > thr


def count_near_far(
    binary: np.ndarray,
    grid: DirectionGrid,
    delta_near_deg: float,
    delta_far_deg: float,
):
    """Per (look direction, frequency): grid points marked 1 that are nearer
    than ``delta_near`` / farther than ``delta_far`` (circular, strict).

    Returns (near_counts, far_counts), both (L, F) ints. Near counts
    measure mainlobe concentration; far counts measure sidelobes and
    outliers.
    """
    if not 0.0 < delta_near_deg < delta_far_deg:
        raise ParameterError("need 0 < delta_near < delta_far")
    az = grid.azimuths_deg
    dist = circ_diff_deg(az[:, None], az[None, :])
    near = (dist < delta_near_deg).astype(np.float64)
    far = (dist > delta_far_deg).astype(np.float64)
    b = binary.astype(np.float64)
    near_counts = np.einsum("hl,hlf->hf", near, b)
    far_counts = np.einsum("hl,hlf->hf", far, b)
    return near_counts.astype(np.int64), far_counts.astype(np.int64)


def rank_and_normalize(
    near_counts: np.ndarray, far_counts: np.ndarray, rank_scope: str = "global"
) -> np.ndarray:
    """Combine the two counts into a normalized reliability map in [0, 1].

    Each cell's score is rank(near, ascending) + rank(far, descending),
    with average ranks on ties, normalized to [0, 1]. Larger is more
    reliable. When every score is equal the map is all ones (a map that
    carries no information should not suppress anything). ``rank_scope``
    chooses whether ranks span all cells jointly or each look direction's
    frequencies separately.
    """
    if near_counts.shape != far_counts.shape:
        raise ParameterError("count maps must share a shape")
    if rank_scope not in RANK_SCOPES:
        raise ParameterError(f"rank_scope must be one of {RANK_SCOPES}")
    near = np.asarray(near_counts, dtype=np.float64)
    far = np.asarray(far_counts, dtype=np.float64)
    if rank_scope == "global":
        score = rankdata(near.ravel()) + rankdata(-far.ravel())
        return _normalize(score).reshape(near.shape)
    out = np.empty_like(near)
    for h in range(near.shape[0]):
        score = rankdata(near[h]) + rankdata(-far[h])
        out[h] = _normalize(score)
    return out


def _normalize(score: np.ndarray) -> np.ndarray:
    lo = score.min()
    hi = score.max()
    if hi == lo:
        return np.ones_like(score)
    return (score - lo) / (hi - lo)


def build_udm(
    steering: SteeringVectorSet,
    thr: float = 0.85,
    delta_near_deg: float = 10.0,
    delta_far_deg: float = 25.0,
    rank_scope: str = "global",
    band: range | None = None,
) -> UDM:
    """Full reliability-map construction from a steering set."""
    directivity = compute_directivity(steering)
    binary = binarize_directivity(directivity, thr)
    near_counts, far_counts = count_near_far(binary, steering.grid, delta_near_deg, delta_far_deg)
    xi_map = rank_and_normalize(near_counts, far_counts, rank_scope)
    return UDM(
        xi_map=xi_map,
        thr=thr,
        delta_near_deg=delta_near_deg,
        delta_far_deg=delta_far_deg,
        grid=steering.grid,
        freqs_hz=steering.freqs_hz,
        band=band,
        rank_scope=rank_scope,
        geometry_label=steering.geometry_label,
    )


def reliability_weight(udm: UDM, phi_hat_deg: float, f_bin: int, xi: float) -> float:
    """w = alpha(phi_hat, f) * xi, looked up at the nearest map cell."""
    col = udm.column_for_bin(f_bin)
    h = udm.grid.nearest_index(phi_hat_deg)
    return float(udm.xi_map[h, col]) * xi


def save_udm(udm: UDM, path) -> None:
    """Write the reliability-map cache (text header + float32 payload)."""
    L, F = udm.xi_map.shape
    header = io.StringIO()
    header.write(f"{_MAGIC} {_VERSION}\n")
    header.write(f"label {udm.geometry_label}\n")
    header.write(f"thr {udm.thr!r}\n")
    header.write(f"delta_near_deg {udm.delta_near_deg!r}\n")
    header.write(f"delta_far_deg {udm.delta_far_deg!r}\n")
    header.write(f"rank_scope {udm.rank_scope}\n")
    if udm.band is None:
        header.write("band none\n")
    else:
        header.write(f"band {udm.band.start} {udm.band.stop}\n")
    header.write(f"L {L}\nF {F}\n")
    header.write("grid " + " ".join(repr(float(a)) for a in udm.grid.azimuths_deg) + "\n")
    header.write("freqs " + " ".join(repr(float(f)) for f in udm.freqs_hz) + "\n")
    header.write("data\n")
    with open(path, "wb") as fh:
        fh.write(header.getvalue().encode("utf-8"))
        fh.write(np.ascontiguousarray(udm.xi_map.astype(np.float32)).tobytes())


def load_udm(path) -> UDM:
    """Read a reliability-map cache written by :func:`save_udm`."""
    with open(path, "rb") as fh:
        magic = fh.readline().decode("utf-8", errors="replace").split()
        if len(magic) != 2 or magic[0] != _MAGIC:
            raise FormatError("not a reliability-map cache file")
        if magic[1] != str(_VERSION):
            raise FormatError(f"unsupported cache version {magic[1]!r}")
        fields: dict[str, str] = {}
        for key in ("label", "thr", "delta_near_deg", "delta_far_deg", "rank_scope",
                    "band", "L", "F", "grid", "freqs"):
            raw = fh.readline()
            if not raw:
                raise FormatError(f"cache truncated while reading {key}")
            name, _, rest = raw.decode("utf-8", errors="replace").rstrip("\n").partition(" ")
            if name != key:
                raise FormatError(f"expected header field {key!r}, found {name!r}")
            fields[key] = rest
        if fh.readline().decode("utf-8", errors="replace").rstrip("\n") != "data":
            raise FormatError("missing 'data' marker before payload")
        try:
            L = int(fields["L"])
            F = int(fields["F"])
            grid_vals = np.array([float(v) for v in fields["grid"].split()])
            freqs = np.array([float(v) for v in fields["freqs"].split()])
            thr = float(fields["thr"])
            d_near = float(fields["delta_near_deg"])
            d_far = float(fields["delta_far_deg"])
            band_parts = fields["band"].split()
            band = None if band_parts == ["none"] else range(int(band_parts[0]), int(band_parts[1]))
        except (ValueError, IndexError) as exc:
            raise FormatError(f"malformed cache header: {exc}") from exc
        payload = fh.read()
        if len(payload) != L * F * 4:
            raise FormatError(f"payload holds {len(payload) // 4} values, expected {L * F}")
        xi_map = np.frombuffer(payload, dtype="<f4").reshape(L, F).astype(np.float64)
    if grid_vals.size != L or freqs.size != F:
        raise FormatError("grid/freqs lists disagree with declared dimensions")
    try:
        grid = DirectionGrid(grid_vals, 360.0 / L if L > 1 else 360.0)
        return UDM(
            xi_map=np.clip(xi_map, 0.0, 1.0),
            thr=thr,
            delta_near_deg=d_near,
            delta_far_deg=d_far,
            grid=grid,
            freqs_hz=freqs,
            band=band,
            rank_scope=fields["rank_scope"],
            geometry_label=fields["label"],
        )
    except ParameterError as exc:
        raise FormatError(f"invalid cache contents: {exc}") from exc
