"""Hot numeric kernels with two interchangeable backends.

The directional-spectrum scan (frames x bins x directions x mics), the
box smoothing of the spectrum tensor and the steering self-similarity
matrix dominate runtime. Each has a numba @njit implementation and a
pure-numpy twin; both produce the same values to ~1e-13.

Backend selection: environment variable ``LSDD_DOA_BACKEND``:

    auto   (default) numba when importable, else numpy
    numba  require the JIT path, raise if numba is missing
    numpy  force the vectorized fallback

``use_backend()`` switches at runtime (tests and the benchmark use it).
"""

from __future__ import annotations

import os

import numpy as np

from .errors import ParameterError

try:
    from numba import njit, prange

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only without numba
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):  # type: ignore[misc]
        def wrap(func):
            return func

        return wrap

    prange = range  # type: ignore[assignment]


# ---------------------------------------------------------------------------
# numpy implementations


def directional_spectrum_block_numpy(X: np.ndarray, V: np.ndarray):
    """Cosine similarity of every snapshot against every steering vector.

    X: (T, F, M) complex snapshots, V: (L, F, M) complex steering set.
    Returns (S, degenerate): S is (T, F, L) in [0, 1]; degenerate marks
    zero-norm snapshots, whose S rows are all zero.
    """
    xnorm = np.linalg.norm(X, axis=2)  # (T, F)
    vnorm = np.linalg.norm(V, axis=2)  # (L, F)
    degenerate = xnorm == 0.0
    inner = np.abs(np.einsum("tfm,lfm->tfl", X, V.conj()))
    denom = xnorm[:, :, None] * vnorm.T[None, :, :]
    denom[degenerate] = 1.0
    S = inner / denom
    S[degenerate] = 0.0
    np.clip(S, 0.0, 1.0, out=S)
    return S, degenerate


def _box_sums_axis(S: np.ndarray, r: int, axis: int) -> np.ndarray:
    n = S.shape[axis]
    pad = np.zeros_like(S.take([0], axis=axis))
    csum = np.concatenate([pad, np.cumsum(S, axis=axis)], axis=axis)
    hi = np.minimum(np.arange(n) + r + 1, n)
    lo = np.maximum(np.arange(n) - r, 0)
    return csum.take(hi, axis=axis) - csum.take(lo, axis=axis)


def _edge_counts(n: int, r: int) -> np.ndarray:
    idx = np.arange(n)
    return np.minimum(idx + r + 1, n) - np.maximum(idx - r, 0)


def box_smooth_numpy(S: np.ndarray, r_t: int, r_f: int) -> np.ndarray:
    """Mean over a (2*r_t+1) x (2*r_f+1) window on the first two axes.

    Windows shrink at the tensor edges and are normalized by the actual
    neighbor count, so edge bins are unbiased.
    """
    out = _box_sums_axis(_box_sums_axis(S, r_t, 0), r_f, 1)
    counts = np.outer(_edge_counts(S.shape[0], r_t), _edge_counts(S.shape[1], r_f))
    out /= counts[:, :, None]
    np.clip(out, 0.0, 1.0, out=out)
    return out


def directivity_matrix_numpy(V: np.ndarray) -> np.ndarray:
    """Pairwise steering similarity: (L, F, M) -> (H=L, L, F) in [0, 1].

    Symmetric in the first two axes; the diagonal is exactly 1.
    """
    vnorm = np.linalg.norm(V, axis=2)  # (L, F)
    inner = np.abs(np.einsum("hfm,lfm->hlf", V, V.conj()))
    lam = inner / (vnorm[:, None, :] * vnorm[None, :, :])
    np.clip(lam, 0.0, 1.0, out=lam)
    idx = np.arange(V.shape[0])
    lam[idx, idx, :] = 1.0
    return lam


# ---------------------------------------------------------------------------
# numba implementations


@njit(cache=True, parallel=True)
def _directional_spectrum_block_jit(X, V, S, degenerate):  # pragma: no cover - jit
    T, F, M = X.shape
    L = V.shape[0]
    for t in prange(T):
        for f in range(F):
            xn = 0.0
            for m in range(M):
                xn += X[t, f, m].real ** 2 + X[t, f, m].imag ** 2
            if xn == 0.0:
                degenerate[t, f] = True
                for l in range(L):
                    S[t, f, l] = 0.0
                continue
            xn = np.sqrt(xn)
            for l in range(L):
                acc = 0.0 + 0.0j
                vn = 0.0
                for m in range(M):
                    acc += X[t, f, m] * np.conj(V[l, f, m])
                    vn += V[l, f, m].real ** 2 + V[l, f, m].imag ** 2
                val = abs(acc) / (xn * np.sqrt(vn))
                if val > 1.0:
                    val = 1.0
                S[t, f, l] = val


def directional_spectrum_block_numba(X: np.ndarray, V: np.ndarray):
    X = np.ascontiguousarray(X, dtype=np.complex128)
    V = np.ascontiguousarray(V, dtype=np.complex128)
    T, F = X.shape[0], X.shape[1]
    S = np.empty((T, F, V.shape[0]), dtype=np.float64)
    degenerate = np.zeros((T, F), dtype=np.bool_)
    _directional_spectrum_block_jit(X, V, S, degenerate)
    return S, degenerate


@njit(cache=True, parallel=True)
def _box_smooth_jit(S, r_t, r_f, out):  # pragma: no cover - jit
    T, F, L = S.shape
    for t in prange(T):
        t0 = max(0, t - r_t)
        t1 = min(T, t + r_t + 1)
        for f in range(F):
            f0 = max(0, f - r_f)
            f1 = min(F, f + r_f + 1)
            norm = 1.0 / ((t1 - t0) * (f1 - f0))
            for l in range(L):
                acc = 0.0
                for ti in range(t0, t1):
                    for fi in range(f0, f1):
                        acc += S[ti, fi, l]
                val = acc * norm
                if val > 1.0:
                    val = 1.0
                elif val < 0.0:
                    val = 0.0
                out[t, f, l] = val


def box_smooth_numba(S: np.ndarray, r_t: int, r_f: int) -> np.ndarray:
    S = np.ascontiguousarray(S, dtype=np.float64)
    out = np.empty_like(S)
    _box_smooth_jit(S, r_t, r_f, out)
    return out


@njit(cache=True, parallel=True)
def _directivity_matrix_jit(V, lam):  # pragma: no cover - jit
    L, F, M = V.shape
    for h in prange(L):
        for f in range(F):
            lam[h, h, f] = 1.0
        for l in range(h + 1, L):
            for f in range(F):
                acc = 0.0 + 0.0j
                hn = 0.0
                ln = 0.0
                for m in range(M):
                    acc += V[h, f, m] * np.conj(V[l, f, m])
                    hn += V[h, f, m].real ** 2 + V[h, f, m].imag ** 2
                    ln += V[l, f, m].real ** 2 + V[l, f, m].imag ** 2
                val = abs(acc) / np.sqrt(hn * ln)
                if val > 1.0:
                    val = 1.0
                lam[h, l, f] = val
                lam[l, h, f] = val


def directivity_matrix_numba(V: np.ndarray) -> np.ndarray:
    V = np.ascontiguousarray(V, dtype=np.complex128)
    lam = np.empty((V.shape[0], V.shape[0], V.shape[1]), dtype=np.float64)
    _directivity_matrix_jit(V, lam)
    return lam


# ---------------------------------------------------------------------------
# dispatch

_IMPLS = {
    "numpy": {
        "spectrum": directional_spectrum_block_numpy,
        "smooth": box_smooth_numpy,
        "directivity": directivity_matrix_numpy,
    },
    "numba": {
        "spectrum": directional_spectrum_block_numba,
        "smooth": box_smooth_numba,
        "directivity": directivity_matrix_numba,
    },
}


def _resolve(name: str) -> str:
    if name == "auto":
        return "numba" if NUMBA_AVAILABLE else "numpy"
    if name == "numba" and not NUMBA_AVAILABLE:
        raise ParameterError("LSDD_DOA_BACKEND=numba but numba is not importable")
    if name not in ("numba", "numpy"):
        raise ParameterError(f"unknown backend {name!r}, expected auto|numba|numpy")
    return name


_BACKEND = _resolve(os.environ.get("LSDD_DOA_BACKEND", "auto").strip().lower() or "auto")


def active_backend() -> str:
    return _BACKEND


def use_backend(name: str) -> str:
    """Switch kernel backend at runtime; returns the backend now active."""
    global _BACKEND
    _BACKEND = _resolve(name.strip().lower())
    return _BACKEND


def directional_spectrum_block(X: np.ndarray, V: np.ndarray):
    return _IMPLS[_BACKEND]["spectrum"](X, V)


def box_smooth(S: np.ndarray, r_t: int, r_f: int) -> np.ndarray:
    return _IMPLS[_BACKEND]["smooth"](S, r_t, r_f)


def directivity_matrix(V: np.ndarray) -> np.ndarray:
    return _IMPLS[_BACKEND]["directivity"](V)
