from __future__ import annotations

import numpy as np
import pytest

from lsdd_doa.errors import BandError, FormatError, InputTooShortError, ParameterError
from lsdd_doa.stft import analyze, band_indices, load_stft_tensor, save_stft_tensor

FS = 16000.0


def test_zero_signal():
    t = analyze(np.zeros((2, 4096)), FS)
    assert np.array_equal(t.values, np.zeros_like(t.values))


def test_frame_count_formula():
    n = 1024 + 512 * 9
    t = analyze(np.zeros((1, n)), FS, nfft=1024, hop=512)
    assert t.num_frames == 10
    # one extra sample does not add a frame; one full hop does
    assert analyze(np.zeros((1, n + 511)), FS).num_frames == 10
    assert analyze(np.zeros((1, n + 512)), FS).num_frames == 11


def test_one_sided_layout():
    t = analyze(np.zeros((3, 2048)), FS, nfft=1024, hop=512)
    assert t.values.shape == (3, 3, 513)
    assert t.bin_freqs_hz[1] == FS / 1024
    assert t.bin_freqs_hz[-1] == FS / 2
    assert t.frame_times_s[0] == 512 / FS


def test_linearity():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(2, 5000))
    a = analyze(x, FS)
    b = analyze(2.0 * x, FS)
    assert np.array_equal(b.values, 2.0 * a.values)


def test_on_bin_sinusoid_peaks_at_bin_32():
    f32 = 32 * FS / 1024
    n = np.arange(1024 + 512 * 7)
    x = np.sin(2 * np.pi * f32 * n / FS)
    t = analyze(x[None, :], FS)
    mags = np.abs(t.values[0])
    assert np.all(np.argmax(mags[1:], axis=1) == 32)


def test_parseval_windowed_energy():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(1, 6000))
    t = analyze(x, FS, nfft=1024, hop=512)
    win = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(1024) / 1024)
    spec_energy = 0.0
    win_energy = 0.0
    for k in range(t.num_frames):
        frame = x[0, k * 512 : k * 512 + 1024] * win
        win_energy += np.sum(frame**2)
        mag2 = np.abs(t.values[0, k]) ** 2
        spec_energy += (mag2[0] + mag2[-1] + 2 * np.sum(mag2[1:-1])) / 1024
    assert abs(spec_energy / win_energy - 1.0) < 0.01


def test_hop_shift_moves_frames_by_one():
    rng = np.random.default_rng(3)
    x = rng.normal(size=(1, 8192))
    a = analyze(x, FS)
    b = analyze(x[:, 512:], FS)
    assert np.max(np.abs(b.values[0, : a.num_frames - 1] - a.values[0, 1:])) < 1e-10


def test_too_short_and_ragged():
    with pytest.raises(InputTooShortError):
        analyze(np.zeros((1, 1023)), FS)
    with pytest.raises(ParameterError):
        analyze([np.zeros(2048), np.zeros(2049)], FS)


def test_rect_window_and_unknown():
    t = analyze(np.ones((1, 1024)), FS, window_kind="rect")
    assert abs(t.values[0, 0, 0] - 1024.0) < 1e-9
    with pytest.raises(ParameterError):
        analyze(np.zeros((1, 2048)), FS, window_kind="hamming")


class TestBandIndices:
    def test_default_band(self):
        t = analyze(np.zeros((1, 2048)), FS, nfft=1024)
        band = band_indices(t, 1500.0, 3500.0)
        assert band == range(96, 225)

    def test_full_band(self):
        t = analyze(np.zeros((1, 2048)), FS, nfft=1024)
        assert band_indices(t, 0.0, FS / 2) == range(0, 513)

    def test_degenerate_band(self):
        t = analyze(np.zeros((1, 2048)), FS)
        with pytest.raises(BandError):
            band_indices(t, 1500.0, 1500.0)
        with pytest.raises(BandError):
            band_indices(t, 1500.0, 9000.0)
        with pytest.raises(BandError):
            band_indices(t, 1501.0, 1502.0)  # between bins


class TestTensorContainer:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(4)
        x = rng.normal(size=(2, 3000))
        t = analyze(x, FS)
        p1 = tmp_path / "a.lsddtf"
        save_stft_tensor(t, p1)
        loaded = load_stft_tensor(p1)
        assert loaded.values.shape == t.values.shape
        assert loaded.sample_rate_hz == t.sample_rate_hz
        p2 = tmp_path / "b.lsddtf"
        save_stft_tensor(loaded, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_bad_payload(self, tmp_path):
        t = analyze(np.zeros((1, 1024)), FS)
        p = tmp_path / "a.lsddtf"
        save_stft_tensor(t, p)
        p.write_bytes(p.read_bytes()[:-4])
        with pytest.raises(FormatError):
            load_stft_tensor(p)
