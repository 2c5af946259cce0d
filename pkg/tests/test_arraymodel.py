from __future__ import annotations

import numpy as np
import pytest

from lsdd_doa.arraymodel import (
    ArrayGeometry,
    build_direction_grid,
    free_field_steering,
    line_geometry,
    load_steering_set,
    ring_geometry,
    save_steering_set,
)
from lsdd_doa.errors import FormatError, ParameterError
from lsdd_doa.spectrum import cosine_similarity


class TestDirectionGrid:
    def test_one_degree(self):
        grid = build_direction_grid(1.0)
        assert len(grid) == 360
        assert grid.azimuths_deg[0] == -179.0
        assert grid.azimuths_deg[-1] == 180.0
        assert np.all(np.diff(grid.azimuths_deg) == 1.0)

    def test_ninety_degrees(self):
        grid = build_direction_grid(90.0)
        assert list(grid.azimuths_deg) == [-90.0, 0.0, 90.0, 180.0]

    @pytest.mark.parametrize("resolution", [0.0, -1.0, 91.0, float("nan")])
    def test_bad_resolution(self, resolution):
        with pytest.raises(ParameterError):
            build_direction_grid(resolution)

    def test_non_divisor_resolution_still_covers(self):
        grid = build_direction_grid(11.0)
        assert len(grid) == round(360 / 11.0)
        assert grid.azimuths_deg[-1] == 180.0
        assert grid.azimuths_deg[0] > -180.0

    def test_nearest_index_wraps(self):
        grid = build_direction_grid(1.0)
        assert grid.azimuths_deg[grid.nearest_index(179.7)] == 180.0
        assert grid.azimuths_deg[grid.nearest_index(-179.7)] == 180.0  # wraps past the edge
        assert grid.azimuths_deg[grid.nearest_index(42.4)] == 42.0

    def test_nearest_index_tie_lower(self):
        grid = build_direction_grid(1.0)
        # -178.5 is equidistant from -179 and -178: lower index wins
        assert grid.azimuths_deg[grid.nearest_index(-178.5)] == -179.0


class TestGeometry:
    def test_duplicate_positions_rejected(self):
        with pytest.raises(ParameterError):
            ArrayGeometry(np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]]))

    def test_nonfinite_rejected(self):
        with pytest.raises(ParameterError):
            ArrayGeometry(np.array([[np.inf, 0.0, 0.0]]))

    def test_single_mic_ok(self):
        geo = ArrayGeometry(np.array([[0.0, 0.0, 0.0]]))
        assert geo.num_mics == 1


class TestFreeFieldSteering:
    def test_origin_mic_is_unity(self, grid1):
        geo = ArrayGeometry(np.array([[0.0, 0.0, 0.0]]), label="origin")
        sv = free_field_steering(geo, grid1, [0.0, 500.0, 3000.0])
        assert np.array_equal(sv.values, np.ones_like(sv.values))

    def test_dc_is_unity(self, ring6, grid1):
        sv = free_field_steering(ring6, grid1, [0.0])
        assert np.array_equal(sv.values, np.ones_like(sv.values))

    def test_hand_phase(self):
        geo = ArrayGeometry(np.array([[0.1, 0.0, 0.0]]))
        grid = build_direction_grid(90.0)
        sv = free_field_steering(geo, grid, [1000.0], c=343.0)
        l0 = int(np.nonzero(grid.azimuths_deg == 0.0)[0][0])
        phase = np.angle(sv.values[l0, 0, 0])
        assert abs(abs(phase) - 2 * np.pi * 1000.0 * 0.1 / 343.0) < 1e-12

    def test_unit_magnitude(self, ring6, grid1):
        sv = free_field_steering(ring6, grid1, [800.0, 2000.0, 3500.0])
        assert np.max(np.abs(np.abs(sv.values) - 1.0)) < 1e-12

    def test_translation_changes_only_common_phase(self, grid1):
        rng = np.random.default_rng(0)
        base = ring_geometry(4, 0.06)
        shifted = ArrayGeometry(base.mic_positions + np.array([0.3, -0.2, 0.1]))
        freqs = [1500.0, 2500.0]
        sv_a = free_field_steering(base, grid1, freqs)
        sv_b = free_field_steering(shifted, grid1, freqs)
        x = rng.normal(size=4) + 1j * rng.normal(size=4)
        for l in range(0, 360, 45):
            for f in range(2):
                da = cosine_similarity(x, sv_a.values[l, f])
                db = cosine_similarity(x, sv_b.values[l, f])
                assert abs(da - db) < 1e-10

    def test_linear_array_reflection_symmetry(self, grid1):
        geo = line_geometry(5, 0.04)
        sv = free_field_steering(geo, grid1, [2000.0])
        az = grid1.azimuths_deg
        for phi in (10.0, 45.0, 120.0):
            lp = int(np.nonzero(az == phi)[0][0])
            lm = int(np.nonzero(az == -phi)[0][0])
            assert np.array_equal(sv.values[lp], sv.values[lm])

    def test_parameter_errors(self, ring6, grid1):
        with pytest.raises(ParameterError):
            free_field_steering(ring6, grid1, [])
        with pytest.raises(ParameterError):
            free_field_steering(ring6, grid1, [-100.0])
        with pytest.raises(ParameterError):
            free_field_steering(ring6, grid1, [1000.0], c=0.0)


class TestSteeringContainer:
    def _small_set(self):
        geo = ring_geometry(3, 0.04)
        grid = build_direction_grid(45.0)
        return free_field_steering(geo, grid, [1000.0, 2000.0])

    def test_round_trip(self, tmp_path):
        sv = self._small_set()
        path = tmp_path / "sv.lsddsv"
        save_steering_set(sv, path)
        loaded = load_steering_set(path)
        # complex64 storage: a second save/load round-trip is bit-exact
        path2 = tmp_path / "sv2.lsddsv"
        save_steering_set(loaded, path2)
        assert path.read_bytes() == path2.read_bytes()
        again = load_steering_set(path2)
        assert np.array_equal(loaded.values, again.values)
        assert np.array_equal(loaded.freqs_hz, sv.freqs_hz)
        assert np.array_equal(loaded.grid.azimuths_deg, sv.grid.azimuths_deg)
        assert loaded.geometry_label == sv.geometry_label

    def test_truncated_payload(self, tmp_path):
        sv = self._small_set()
        path = tmp_path / "sv.lsddsv"
        save_steering_set(sv, path)
        raw = path.read_bytes()
        path.write_bytes(raw[:-8])  # drop one complex64 value
        with pytest.raises(FormatError, match="expected"):
            load_steering_set(path)

    def test_zero_norm_vector_names_index(self, tmp_path):
        sv = self._small_set()
        path = tmp_path / "sv.lsddsv"
        save_steering_set(sv, path)
        raw = bytearray(path.read_bytes())
        # zero out the complex values of direction 2, frequency bin 1
        header_len = len(raw) - sv.values.size * 8
        offset = header_len + ((2 * 2 + 1) * 3) * 8
        raw[offset : offset + 3 * 8] = b"\x00" * 24
        path.write_bytes(bytes(raw))
        with pytest.raises(FormatError, match="direction 2, frequency bin 1"):
            load_steering_set(path)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "junk.lsddsv"
        path.write_bytes(b"NOTAFILE 9\n")
        with pytest.raises(FormatError):
            load_steering_set(path)

    def test_band_usable_fixture(self, tmp_path, ring6, grid1):
        # a measured-style container covering 0..8000 Hz serves the default band
        freqs = np.arange(513) * 16000.0 / 1024.0
        sv = free_field_steering(ring6, grid1, freqs)
        path = tmp_path / "full.lsddsv"
        save_steering_set(sv, path)
        loaded = load_steering_set(path)
        from lsdd_doa.spectrum import _steering_band_indices

        wanted = np.arange(96, 225) * 16000.0 / 1024.0
        idx = _steering_band_indices(loaded, wanted)
        assert idx[0] == 96 and idx[-1] == 224
