from __future__ import annotations

import warnings

import numpy as np
import pytest

from lsdd_doa.arraymodel import build_direction_grid, free_field_steering, ring_geometry

warnings.filterwarnings("ignore", message="The TBB threading layer requires TBB")


@pytest.fixture(scope="session")
def ring6():
    return ring_geometry(6, 0.05)


@pytest.fixture(scope="session")
def grid1():
    return build_direction_grid(1.0)


@pytest.fixture(scope="session")
def band_freqs():
    """The default operating band frequencies at 16 kHz / nfft 1024."""
    return np.arange(96, 225) * 16000.0 / 1024.0


@pytest.fixture(scope="session")
def steering_band(ring6, grid1, band_freqs):
    return free_field_steering(ring6, grid1, band_freqs)
