"""Shared fixtures and independent oracles used across the suite.

The oracle helpers deliberately avoid the library's own code paths:
window means via boolean masks and math.fsum, least squares via an exact
rational solve of the normal equations, energy via an explicit
trapezoid loop.
"""

from __future__ import annotations

from fractions import Fraction
from math import fsum

import numpy as np
import pytest

from jetcal.traces import PowerTrace


@pytest.fixture
def rng():
    return np.random.default_rng(20230517)


def make_trace(ts, values, device="nano", source="internal", unit="mW"):
    return PowerTrace(device, source, unit,
                      np.asarray(ts, dtype=np.int64),
                      np.asarray(values, dtype=np.float64))


def oracle_window_mean(ts, values, t, window_us):
    """Brute-force mean of samples with timestamp in (t - window, t]."""
    ts = np.asarray(ts)
    mask = (ts > t - window_us) & (ts <= t)
    picked = np.asarray(values)[mask]
    return fsum(picked) / len(picked)


def oracle_ols(x, y):
    """Exact rational solve of the 2x2 normal equations.

    Sums are computed with fsum (correctly rounded) and the solve itself
    is exact Fraction arithmetic, so the result is an independently
    computed minimizer accurate to the quality of four sums.
    """
    n = Fraction(len(x))
    sx = Fraction(fsum(x))
    sy = Fraction(fsum(y))
    sxx = Fraction(fsum(float(v) * float(v) for v in x))
    sxy = Fraction(fsum(float(a) * float(b) for a, b in zip(x, y)))
    den = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / den
    intercept = (sxx * sy - sx * sxy) / den
    return float(slope), float(intercept)


def oracle_trapezoid_mj(ts, values):
    """Explicit piecewise trapezoid sum, mW * us reconciled to mJ."""
    total = fsum(
        (values[i] + values[i + 1]) / 2.0 * (ts[i + 1] - ts[i])
        for i in range(len(ts) - 1)
    )
    return total / 1e6


def oracle_sum_squared_residuals(x, y, slope, intercept):
    return fsum((yi - slope * xi - intercept) ** 2 for xi, yi in zip(x, y))
