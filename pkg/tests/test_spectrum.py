from __future__ import annotations

import numpy as np
import pytest

from lsdd_doa import _kernels
from lsdd_doa.arraymodel import (
    DirectionGrid,
    build_direction_grid,
    free_field_steering,
    ring_geometry,
)
from lsdd_doa.errors import DegenerateInputError, ParameterError
from lsdd_doa.spectrum import (
    SpectrumTensor,
    compute_spectrum,
    cosine_similarity,
    directional_spectrum,
    estimate_bins,
    smooth_spectrum,
)
from lsdd_doa.stft import STFTTensor, band_indices

from oracles import naive_box_smooth, naive_cosine


class TestCosineSimilarity:
    def test_self_similarity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            a = rng.normal(size=5) + 1j * rng.normal(size=5)
            assert cosine_similarity(a, a) == pytest.approx(1.0, abs=1e-12)

    def test_orthogonal(self):
        assert cosine_similarity([1.0, 0.0], [0.0, 1.0]) == 0.0

    def test_hand_value(self):
        assert cosine_similarity([1.0, 0.0], [1.0, 1.0]) == pytest.approx(0.7071068, abs=1e-6)

    def test_zero_norm_raises(self):
        with pytest.raises(DegenerateInputError):
            cosine_similarity([0.0, 0.0], [1.0, 0.0])

    def test_scaling_invariance(self):
        rng = np.random.default_rng(1)
        a = rng.normal(size=6) + 1j * rng.normal(size=6)
        b = rng.normal(size=6) + 1j * rng.normal(size=6)
        d = cosine_similarity(a, b)
        # power-of-two real scalings are bit-exact
        assert cosine_similarity(2.0 * a, b) == d
        assert cosine_similarity(a, -0.5 * b) == d
        # arbitrary complex scalings to floating tolerance
        assert cosine_similarity(3.7 * np.exp(1j * 1.1) * a, b) == pytest.approx(d, abs=1e-12)

    def test_matches_naive(self):
        rng = np.random.default_rng(2)
        for _ in range(50):
            a = rng.normal(size=4) + 1j * rng.normal(size=4)
            b = rng.normal(size=4) + 1j * rng.normal(size=4)
            assert cosine_similarity(a, b) == pytest.approx(naive_cosine(a, b), abs=1e-14)


class TestDirectionalSpectrum:
    def test_self_steering_peaks_at_one(self, steering_band):
        V = steering_band.values
        for l in (0, 90, 271):
            S = directional_spectrum(V[l, 40], V[:, 40, :])
            assert S[l] == pytest.approx(1.0, abs=1e-12)
            assert np.argmax(S) == l

    def test_scale_phase_invariance(self, steering_band):
        rng = np.random.default_rng(3)
        x = rng.normal(size=6) + 1j * rng.normal(size=6)
        S = directional_spectrum(x, steering_band.values[:, 10, :])
        S2 = directional_spectrum(2.0 * x, steering_band.values[:, 10, :])
        assert np.array_equal(S, S2)
        S3 = directional_spectrum(np.exp(1j * 0.3) * 1.7 * x, steering_band.values[:, 10, :])
        assert np.max(np.abs(S3 - S)) < 1e-12
        assert np.argmax(S3) == np.argmax(S)

    def test_zero_snapshot_returns_zeros(self, steering_band):
        S = directional_spectrum(np.zeros(6, dtype=complex), steering_band.values[:, 0, :])
        assert np.array_equal(S, np.zeros(360))

    def test_range(self, steering_band):
        rng = np.random.default_rng(4)
        x = rng.normal(size=6) + 1j * rng.normal(size=6)
        S = directional_spectrum(x, steering_band.values[:, 50, :])
        assert np.all(S >= 0.0) and np.all(S <= 1.0)


def _spectrum_fixture(rng, frames=6, bins=5, dirs=24):
    S = rng.uniform(0.0, 1.0, size=(frames, bins, dirs))
    grid = build_direction_grid(360.0 / dirs)
    return SpectrumTensor(S, grid, range(10, 10 + bins), np.zeros((frames, bins), dtype=bool))


class TestSmoothing:
    def test_identity_window(self):
        rng = np.random.default_rng(5)
        spec = _spectrum_fixture(rng)
        out = smooth_spectrum(spec, 1, 1)
        assert np.array_equal(out.values, spec.values)

    def test_constant_unchanged(self):
        spec = SpectrumTensor(
            np.full((4, 4, 8), 0.5),
            build_direction_grid(45.0),
            range(0, 4),
            np.zeros((4, 4), dtype=bool),
        )
        out = smooth_spectrum(spec, 3, 3)
        assert np.array_equal(out.values, spec.values)

    def test_interior_impulse_u33(self):
        values = np.zeros((5, 5, 2))
        values[2, 2, 0] = 1.0
        grid = DirectionGrid(np.array([0.0, 180.0]), 180.0)
        spec = SpectrumTensor(values, grid, range(0, 5), np.zeros((5, 5), dtype=bool))
        out = smooth_spectrum(spec, 3, 3).values
        expected = np.zeros((5, 5, 2))
        expected[1:4, 1:4, 0] = 1.0 / 9.0
        assert np.allclose(out, expected, atol=1e-15)

    def test_corner_impulse_shrinks_window(self):
        values = np.zeros((5, 5, 1))
        values[0, 0, 0] = 1.0
        grid = DirectionGrid(np.array([0.0]), 360.0)
        spec = SpectrumTensor(values, grid, range(0, 5), np.zeros((5, 5), dtype=bool))
        out = smooth_spectrum(spec, 3, 3).values
        assert out[0, 0, 0] == pytest.approx(0.25, abs=1e-15)  # 2x2 actual neighbors

    def test_even_window_rejected(self):
        rng = np.random.default_rng(6)
        spec = _spectrum_fixture(rng)
        with pytest.raises(ParameterError):
            smooth_spectrum(spec, 2, 3)
        with pytest.raises(ParameterError):
            smooth_spectrum(spec, 3, 0)

    def test_matches_naive(self):
        rng = np.random.default_rng(7)
        S = rng.uniform(0.0, 1.0, size=(7, 6, 4))
        for r_t, r_f in [(0, 0), (1, 1), (1, 3), (2, 2)]:
            got = _kernels.box_smooth(S, r_t, r_f)
            assert np.allclose(got, naive_box_smooth(S, r_t, r_f), atol=1e-13)

    def test_preserves_range(self):
        rng = np.random.default_rng(8)
        spec = _spectrum_fixture(rng, frames=10, bins=9)
        out = smooth_spectrum(spec, 5, 7).values
        assert np.all(out >= 0.0) and np.all(out <= 1.0)


class TestEstimateBins:
    def _tensor(self, values):
        grid = build_direction_grid(360.0 / values.shape[2])
        return SpectrumTensor(
            values, grid, range(0, values.shape[1]), np.zeros(values.shape[:2], dtype=bool)
        )

    def test_basic_fields(self):
        values = np.full((1, 1, 60), 0.1)
        values[0, 0, 37] = 0.8
        spec = self._tensor(values)
        (est,) = estimate_bins(spec, spec.grid, 0.7)
        assert est.phi_hat_deg == spec.grid.azimuths_deg[37]
        assert est.xi == 0.8
        assert est.valid
        assert est.t == 0 and est.f == 0

    def test_below_threshold_invalid(self):
        values = np.full((1, 1, 60), 0.1)
        values[0, 0, 5] = 0.6
        spec = self._tensor(values)
        (est,) = estimate_bins(spec, spec.grid, 0.7)
        assert not est.valid

    def test_tie_breaks_to_lowest_index(self):
        values = np.zeros((1, 1, 60))
        values[0, 0, 10] = 0.9
        values[0, 0, 20] = 0.9
        spec = self._tensor(values)
        (est,) = estimate_bins(spec, spec.grid, 0.5)
        assert est.phi_hat_deg == spec.grid.azimuths_deg[10]

    def test_degenerate_bins_skipped(self):
        values = np.full((2, 2, 10), 0.5)
        degenerate = np.zeros((2, 2), dtype=bool)
        degenerate[1, 0] = True
        spec = SpectrumTensor(values, build_direction_grid(36.0), range(0, 2), degenerate)
        ests = estimate_bins(spec, spec.grid, 0.2)
        assert len(ests) == 3
        assert all(not (e.t == 1 and e.f == 0) for e in ests)

    def test_lambda_monotonicity(self):
        rng = np.random.default_rng(9)
        spec = _spectrum_fixture(rng, frames=8, bins=6, dirs=36)
        lambdas = [0.1, 0.3, 0.5, 0.7, 0.9]
        valid_sets = []
        for lam in lambdas:
            ests = estimate_bins(spec, spec.grid, lam)
            valid_sets.append({(e.t, e.f) for e in ests if e.valid})
        for small, large in zip(valid_sets[1:], valid_sets[:-1]):
            assert small <= large

    def test_lambda_out_of_range(self):
        rng = np.random.default_rng(10)
        spec = _spectrum_fixture(rng)
        with pytest.raises(ParameterError):
            estimate_bins(spec, spec.grid, 1.5)


class TestComputeSpectrum:
    def test_noiseless_single_source_exact(self, ring6, grid1):
        rng = np.random.default_rng(11)
        freqs = np.arange(513) * 16000.0 / 1024.0
        sv = free_field_steering(ring6, grid1, freqs)
        h = 137  # some grid direction
        frames, bins = 4, 513
        s = rng.normal(size=(frames, bins)) + 1j * rng.normal(size=(frames, bins))
        values = np.transpose(s[:, :, None] * sv.values[h][None, :, :], (2, 0, 1))
        tensor = STFTTensor(values, 16000.0, 1024, 512)
        band = band_indices(tensor, 1500.0, 3500.0)
        spec = compute_spectrum(tensor, sv, band)
        ests = estimate_bins(spec, grid1, 0.7)
        assert all(e.phi_hat_deg == grid1.azimuths_deg[h] for e in ests)
        assert all(e.xi >= 1.0 - 1e-12 for e in ests)

    def test_scale_invariance_of_estimates(self, ring6, grid1):
        rng = np.random.default_rng(12)
        values = rng.normal(size=(6, 3, 513)) + 1j * rng.normal(size=(6, 3, 513))
        tensor_a = STFTTensor(values, 16000.0, 1024, 512)
        tensor_b = STFTTensor(2.0 * values, 16000.0, 1024, 512)
        sv = free_field_steering(ring6, grid1, np.arange(513) * 16000.0 / 1024.0)
        band = band_indices(tensor_a, 1500.0, 3500.0)
        ests_a = estimate_bins(compute_spectrum(tensor_a, sv, band), grid1, 0.4)
        ests_b = estimate_bins(compute_spectrum(tensor_b, sv, band), grid1, 0.4)
        assert len(ests_a) == len(ests_b)
        for ea, eb in zip(ests_a, ests_b):
            assert ea == eb  # every field identical

    def test_mic_count_mismatch(self, grid1):
        geo = ring_geometry(4, 0.05)
        sv = free_field_steering(geo, grid1, np.arange(513) * 16000.0 / 1024.0)
        tensor = STFTTensor(np.zeros((6, 2, 513), dtype=complex), 16000.0, 1024, 512)
        with pytest.raises(ParameterError):
            compute_spectrum(tensor, sv, range(96, 225))


class TestBackends:
    def test_spectrum_backends_agree(self):
        rng = np.random.default_rng(13)
        X = rng.normal(size=(9, 7, 5)) + 1j * rng.normal(size=(9, 7, 5))
        X[3, 2] = 0.0  # degenerate snapshot
        V = np.exp(1j * rng.normal(size=(33, 7, 5)))
        S_np, d_np = _kernels.directional_spectrum_block_numpy(X, V)
        S_nb, d_nb = _kernels.directional_spectrum_block_numba(X, V)
        assert np.array_equal(d_np, d_nb)
        assert d_np[3, 2]
        assert np.allclose(S_np, S_nb, atol=1e-13)
        assert np.array_equal(S_np[3, 2], np.zeros(33))

    def test_smooth_backends_agree(self):
        rng = np.random.default_rng(14)
        S = rng.uniform(size=(12, 9, 6))
        assert np.allclose(
            _kernels.box_smooth_numpy(S, 2, 3), _kernels.box_smooth_numba(S, 2, 3), atol=1e-13
        )

    def test_directivity_backends_agree(self):
        rng = np.random.default_rng(15)
        V = np.exp(1j * rng.normal(size=(17, 4, 5)))
        a = _kernels.directivity_matrix_numpy(V)
        b = _kernels.directivity_matrix_numba(V)
        assert np.allclose(a, b, atol=1e-13)

    def test_backend_switching(self):
        before = _kernels.active_backend()
        try:
            assert _kernels.use_backend("numpy") == "numpy"
            rng = np.random.default_rng(16)
            X = rng.normal(size=(2, 2, 3)) + 1j * rng.normal(size=(2, 2, 3))
            V = np.exp(1j * rng.normal(size=(5, 2, 3)))
            S, _ = _kernels.directional_spectrum_block(X, V)
            assert S.shape == (2, 2, 5)
            with pytest.raises(ParameterError):
                _kernels.use_backend("cuda")
        finally:
            _kernels.use_backend(before)
