from __future__ import annotations

import numpy as np
from hypothesis import given, strategies as st

from lsdd_doa.angles import circ_diff_deg, unwrap_near_deg, wrap_deg

finite_angles = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)
in_range = st.floats(min_value=-179.999, max_value=180.0, allow_nan=False)


def test_wrap_edges():
    assert wrap_deg(180.0) == 180.0
    assert wrap_deg(-180.0) == 180.0
    assert wrap_deg(0.0) == 0.0
    assert wrap_deg(190.0) == -170.0
    assert wrap_deg(-190.0) == 170.0
    assert wrap_deg(360.0) == 0.0
    assert wrap_deg(540.0) == 180.0


@given(in_range)
def test_wrap_identity_in_range(x):
    assert wrap_deg(x) == x


@given(finite_angles)
def test_wrap_lands_in_range(x):
    w = float(wrap_deg(x))
    assert -180.0 < w <= 180.0
    # same point on the circle
    assert abs((x - w) / 360.0 - round((x - w) / 360.0)) < 1e-9


@given(finite_angles, finite_angles)
def test_circ_diff_symmetric_bounded(a, b):
    d = float(circ_diff_deg(a, b))
    assert 0.0 <= d <= 180.0
    assert d == float(circ_diff_deg(b, a))


@given(in_range, in_range)
def test_unwrap_near_window(x, ref):
    u = float(unwrap_near_deg(x, ref))
    assert ref - 180.0 < u <= ref + 180.0 + 1e-9
    assert abs((u - x) / 360.0 - round((u - x) / 360.0)) < 1e-12


def test_unwrap_examples():
    assert unwrap_near_deg(-175.0, 180.0) == 185.0
    assert unwrap_near_deg(170.0, 160.0) == 170.0
    assert unwrap_near_deg(10.0, 10.0) == 10.0


def test_vectorized():
    x = np.array([-190.0, 0.0, 190.0])
    assert np.array_equal(wrap_deg(x), np.array([170.0, 0.0, -170.0]))
