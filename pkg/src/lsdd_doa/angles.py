"""Circular azimuth arithmetic on the (-180, +180] degree convention.

All three helpers are exact for inputs already in range: wrapping only
ever adds or subtracts an exact multiple of 360, so no rounding noise is
introduced (this matters for the exact-equality invariants downstream).
"""

from __future__ import annotations

import numpy as np


def wrap_deg(x):
    """Wrap angle(s) in degrees into (-180, +180].

    Works on scalars and arrays. The upper edge is inclusive: +180 stays
    +180 and -180 maps to +180. In-range values pass through bit-exactly.
    """
    x = np.asarray(x, dtype=float)
    w = np.mod(x, 360.0)
    w = np.where(w > 180.0, w - 360.0, w)
    return np.where((x > -180.0) & (x <= 180.0), x, w)


def circ_diff_deg(a, b):
    """Absolute circular difference in degrees, in [0, 180]."""
    return np.abs(wrap_deg(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))


def unwrap_near_deg(x, ref):
    """Shift angle(s) by exact multiples of 360 to the representative in
    (ref - 180, ref + 180]. Values already there pass through bit-exactly."""
    x = np.asarray(x, dtype=float)
    k = np.ceil((x - ref - 180.0) / 360.0)
    return x - 360.0 * k
