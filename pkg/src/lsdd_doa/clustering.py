"""Subtractive weighted clustering of per-bin DOA estimates.

Valid estimates are accumulated into a 1-degree weighted histogram over
the azimuth ring. Clusters are extracted greedily: pick the center whose
+-delta window captures the most weight, zero that window, repeat. With K
active speakers the procedure runs K+1 times; the (K+1)th captured weight
is the noise reference for the cluster quality Q(k) = W_k / W_{K+1}.

The histogram is a 360-bin ring (integer degrees, -179..+180, with +180
and -180 merged), so windows, zeroing and means never see an edge at
+-180.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .angles import unwrap_near_deg, wrap_deg
from .errors import ParameterError

NUM_BINS = 360
_LABEL_OF_INDEX = np.arange(NUM_BINS) - 179  # array index 0..359 -> degree label


def histogram_bin_index(theta_deg: float) -> int:
    """Ring index of the integer-degree bin nearest an azimuth.

    Round half up (x.5 goes to the upper bin), then wrap: labels run
    -179..+180, so 180.4 stays in bin +180 and 180.6 wraps to -179.
    """
    return (int(math.floor(theta_deg + 0.5)) + 179) % NUM_BINS


@dataclass(frozen=True)
class WeightedHistogram:
    """Weight accumulators over the integer-degree azimuth ring."""

    bins: np.ndarray  # (360,) nonnegative weights

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.float64)
        if b.shape != (NUM_BINS,):
            raise ParameterError(f"histogram must hold exactly {NUM_BINS} bins")
        if np.any(b < 0) or not np.all(np.isfinite(b)):
            raise ParameterError("histogram weights must be finite and nonnegative")
        object.__setattr__(self, "bins", b)

    @property
    def total_weight(self) -> float:
        return float(self.bins.sum())


def accumulate(estimates) -> WeightedHistogram:
    """Histogram a sequence of (theta_hat_deg, weight) pairs.

    Each estimate lands in the single integer-degree bin nearest its
    azimuth (wrap-aware), contributing its full weight.
    """
    bins = np.zeros(NUM_BINS)
    thetas = []
    weights = []
    for theta, w in estimates:
        if not math.isfinite(theta):
            raise ParameterError("estimate azimuths must be finite")
        if w < 0:
            raise ParameterError("estimate weights must be nonnegative")
        thetas.append(theta)
        weights.append(w)
    if thetas:
        idx = (np.floor(np.asarray(thetas) + 0.5).astype(np.int64) + 179) % NUM_BINS
        np.add.at(bins, idx, np.asarray(weights, dtype=np.float64))
    return WeightedHistogram(bins)


@dataclass(frozen=True)
class ProvisionalCluster:
    """One greedy extraction: center label, captured weight, claimed bins.

    ``center_deg`` is None when the histogram was exhausted before this
    iteration (captured weight 0). ``bin_indices`` are the ring indices
    newly zeroed by this cluster; estimates in those bins are its members.
    """

    center_deg: float | None
    weight: float
    bin_indices: np.ndarray


def subtractive_cluster(
    hist: WeightedHistogram, num_speakers: int, window_half_width_deg: int
) -> list[ProvisionalCluster]:
    """Extract num_speakers + 1 provisional clusters by greedy window peaks.

    Window sums and zeroing are circular. Ties on the window sum prefer
    the center holding the most weight itself (so an isolated spike is
    its own center, not a window edge), then the lowest center label.
    Captured weights are non-increasing across iterations.
    """
    if num_speakers < 1:
        raise ParameterError("need at least one speaker")
    delta = int(window_half_width_deg)
    if delta < 1 or delta > 179:
        raise ParameterError("window half-width must be an integer in [1, 179] degrees")

    window = np.arange(-delta, delta + 1)
    idx_matrix = (np.arange(NUM_BINS)[:, None] + window[None, :]) % NUM_BINS
    weights = hist.bins.copy()
    claimed = np.zeros(NUM_BINS, dtype=bool)
    out: list[ProvisionalCluster] = []
    for _ in range(num_speakers + 1):
        window_sums = weights[idx_matrix].sum(axis=1)
        peak = window_sums.max()
        candidates = np.nonzero(window_sums == peak)[0]
        center = int(candidates[np.argmax(weights[candidates])])
        captured = float(peak)
        if captured == 0.0:
            out.append(ProvisionalCluster(None, 0.0, np.empty(0, dtype=np.int64)))
            continue
        win = idx_matrix[center]
        fresh = win[~claimed[win]]
        out.append(ProvisionalCluster(float(_LABEL_OF_INDEX[center]), captured, np.sort(fresh)))
        claimed[win] = True
        weights[win] = 0.0
    return out


def cluster_doa(members, center_deg: float) -> float | None:
    """Weight-averaged DOA of a cluster's member estimates.

    Each azimuth is unwrapped to the representative nearest the cluster
    center before averaging; the result is re-wrapped to (-180, +180].
    Returns None when the members carry no weight.
    """
    num = 0.0
    den = 0.0
    for theta, w in members:
        num += w * unwrap_near_deg(theta, center_deg)
        den += w
    if den == 0.0:
        return None
    return float(wrap_deg(num / den))


def quality(weights, num_speakers: int, q_cap: float = 1e6) -> list[float]:
    """Cluster qualities Q(k) = W_k / W_{K+1} for k = 1..K.

    When the (K+1)th captured weight is zero the ratio is undefined; any
    cluster that did capture weight gets the finite cap (keeping reports
    sortable) and empty clusters get 0.
    """
    w = list(weights)
    if len(w) != num_speakers + 1:
        raise ParameterError("need num_speakers + 1 weights")
    if any(w[i] < w[i + 1] for i in range(len(w) - 1)):
        raise ParameterError("weights must be non-increasing")
    ref = w[num_speakers]
    out = []
    for k in range(num_speakers):
        if ref > 0.0:
            out.append(w[k] / ref)
        else:
            out.append(q_cap if w[k] > 0.0 else 0.0)
    return out


@dataclass(frozen=True)
class ClusterResult:
    """Final per-cluster output for one interval."""

    k: int  # 1-based rank by captured weight
    center_deg: float | None
    theta_hat_deg: float | None
    weight: float
    member_count: int
    quality: float


def cluster_interval(
    estimates,
    num_speakers: int,
    window_half_width_deg: int = 10,
    q_cap: float = 1e6,
    uniform_quality: bool = False,
):
    """Run the full clustering of one interval's valid (theta, w) estimates.

    Returns (clusters, extra_weight): the K ClusterResults in selection
    order and the (K+1)th captured weight used as the quality reference.
    With ``uniform_quality`` every quality is reported as 1 (the baseline
    behavior) while the weights and DOAs are unchanged.
    """
    est = [(float(t), float(w)) for t, w in estimates]
    hist = accumulate(est)
    provisional = subtractive_cluster(hist, num_speakers, window_half_width_deg)
    qualities = quality([p.weight for p in provisional], num_speakers, q_cap)

    bin_of = np.array([histogram_bin_index(t) for t, _ in est], dtype=np.int64) if est else None
    clusters: list[ClusterResult] = []
    for k in range(num_speakers):
        prov = provisional[k]
        q = 1.0 if uniform_quality else qualities[k]
        if prov.center_deg is None:
            clusters.append(ClusterResult(k + 1, None, None, 0.0, 0, q))
            continue
        member_mask = np.isin(bin_of, prov.bin_indices)
        members = [est[i] for i in np.nonzero(member_mask)[0]]
        theta = cluster_doa(members, prov.center_deg)
        clusters.append(
            ClusterResult(k + 1, prov.center_deg, theta, prov.weight, len(members), q)
        )
    return clusters, provisional[num_speakers].weight
