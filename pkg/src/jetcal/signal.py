"""Time-series conditioning: moving-average filter, alignment, peak detection.

The moving average uses a causal (trailing) window so the same code path
serves live sampling and offline batch processing. The window at output
time t covers timestamps in (t - window_us, t]; samples earlier than one
full window after the trace start are dropped rather than averaged over a
partial window, because partial windows have inflated variance.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import (BaselineUndefinedError, EmptyOverlapError,
                     InsufficientDataError, UnitError)
from .regression import PairedDataset
from .traces import PowerSample, PowerTrace

# Streaming sums are recomputed exactly after this many pushes so float
# drift stays bounded no matter how long the filter runs.
_RESUM_INTERVAL = 1_000_000

DEFAULT_WINDOW_US = 100_000
DEFAULT_MAX_GAP_US = 10_000


class MovingAverageFilter:
    """Incremental trailing-window mean over irregularly spaced samples.

    Single-owner: feed it from one thread at a time. push() returns the
    filtered sample once the warm-up window has elapsed, else None.

    The running sum uses Neumaier compensation plus a periodic exact
    recomputation, so emitted means match a brute-force per-window mean
    to within 1e-12 relative indefinitely.
    """

    def __init__(self, window_us: int):
        if window_us <= 0:
            raise ValueError(f"window must be positive, got {window_us}")
        self.window_us = int(window_us)
        self._window: deque[tuple[int, float]] = deque()
        self._sum = 0.0
        self._comp = 0.0
        self._start_us: int | None = None
        self._last_us: int | None = None
        self._pushes = 0

    def _add(self, x: float) -> None:
        t = self._sum + x
        if abs(self._sum) >= abs(x):
            self._comp += (self._sum - t) + x
        else:
            self._comp += (x - t) + self._sum
        self._sum = t

    def push(self, timestamp_us: int, value: float) -> PowerSample | None:
        timestamp_us = int(timestamp_us)
        if self._last_us is not None and timestamp_us <= self._last_us:
            raise ValueError(
                f"timestamps must be strictly increasing "
                f"({timestamp_us} after {self._last_us})"
            )
        if self._start_us is None:
            self._start_us = timestamp_us
        self._last_us = timestamp_us

        self._window.append((timestamp_us, value))
        self._add(value)
        cutoff = timestamp_us - self.window_us
        while self._window[0][0] <= cutoff:
            _, old = self._window.popleft()
            self._add(-old)

        self._pushes += 1
        if self._pushes % _RESUM_INTERVAL == 0:
            self._sum = math.fsum(v for _, v in self._window)
            self._comp = 0.0

        if timestamp_us < self._start_us + self.window_us:
            return None
        mean = (self._sum + self._comp) / len(self._window)
        return PowerSample(timestamp_us, mean)


def moving_average(trace: PowerTrace, window_us: int = DEFAULT_WINDOW_US) -> PowerTrace:
    """Causal moving-average filter over a whole trace.

    Output keeps the timestamps of the input samples it was emitted for;
    warm-up samples (the first window_us of the trace) are dropped. A
    window longer than the trace span therefore yields an empty trace.
    """
    if len(trace) == 0:
        raise InsufficientDataError("cannot filter an empty trace")
    maf = MovingAverageFilter(window_us)
    out_ts = []
    out_vals = []
    for t, v in zip(trace.timestamps_us, trace.values):
        emitted = maf.push(int(t), float(v))
        if emitted is not None:
            out_ts.append(emitted.timestamp_us)
            out_vals.append(emitted.value)
    return PowerTrace(
        trace.device, trace.source, trace.unit,
        np.array(out_ts, dtype=np.int64),
        np.array(out_vals, dtype=np.float64),
        trace.warnings,
    )


def align(internal: PowerTrace, external: PowerTrace,
          max_gap_us: int = DEFAULT_MAX_GAP_US) -> PairedDataset:
    """Pair each internal sample with the external value at the same instant.

    The external stream is linearly interpolated at every internal
    timestamp that falls inside its span. A pair is kept only when both
    bracketing external samples are within max_gap_us of the internal
    timestamp, so stale interpolations across recording gaps are dropped.
    Interpolation at an exact external knot returns the knot value.
    """
    if len(internal) == 0 or len(external) == 0:
        raise EmptyOverlapError("both traces must be non-empty")
    if internal.unit != "mW" or external.unit != "mW":
        raise UnitError(
            f"alignment requires mW traces, got {internal.unit} and {external.unit}"
        )
    ext_ts = external.timestamps_us
    ext_vals = external.values
    lo, hi = int(ext_ts[0]), int(ext_ts[-1])
    if internal.timestamps_us[-1] < lo or internal.timestamps_us[0] > hi:
        raise EmptyOverlapError(
            "internal and external traces share no time span"
        )

    in_span = (internal.timestamps_us >= lo) & (internal.timestamps_us <= hi)
    ts = internal.timestamps_us[in_span]
    raw = internal.values[in_span]
    if len(ts) == 0:
        return PairedDataset(internal.device,
                             np.empty(0, np.int64), np.empty(0), np.empty(0))

    left = np.searchsorted(ext_ts, ts, side="right") - 1
    at_knot = ext_ts[left] == ts
    right = np.where(at_knot, left, np.minimum(left + 1, len(ext_ts) - 1))

    left_gap = ts - ext_ts[left]
    right_gap = ext_ts[right] - ts
    keep = (left_gap <= max_gap_us) & (right_gap <= max_gap_us)

    span = (ext_ts[right] - ext_ts[left]).astype(np.float64)
    frac = np.zeros_like(span)
    np.divide((ts - ext_ts[left]).astype(np.float64), span, out=frac, where=span > 0)
    interp = ext_vals[left] + (ext_vals[right] - ext_vals[left]) * frac
    interp = np.where(at_knot, ext_vals[left], interp)

    return PairedDataset(internal.device, ts[keep], raw[keep], interp[keep])


@dataclass(frozen=True)
class PeakReport:
    """Largest excursion of a trace relative to a threshold."""

    peak_value: float
    peak_timestamp_us: int
    baseline: float
    duration_above_threshold_us: int
    threshold: float

    def __post_init__(self):
        if self.peak_value < self.baseline:
            raise ValueError("peak below baseline")
        if self.duration_above_threshold_us < 0:
            raise ValueError("negative duration")


def detect_peak(trace: PowerTrace, threshold: float) -> PeakReport:
    """Characterize the global maximum of a trace.

    Baseline is the median of samples strictly below the threshold, which
    is robust against the tail of a boot transient. Duration above the
    threshold is summed per sample as the forward gap to the next sample;
    a final sample above the threshold contributes nothing because no
    spacing follows it.
    """
    if len(trace) == 0:
        raise InsufficientDataError("cannot detect a peak in an empty trace")
    if not math.isfinite(threshold):
        raise ValueError(f"threshold must be finite, got {threshold}")
    vals = trace.values
    ts = trace.timestamps_us
    peak_idx = int(np.argmax(vals))
    below = vals < threshold
    if not below.any():
        raise BaselineUndefinedError(
            f"every sample is at or above threshold {threshold}"
        )
    above = vals >= threshold
    duration = int(np.diff(ts)[above[:-1]].sum()) if len(ts) > 1 else 0
    return PeakReport(
        peak_value=float(vals[peak_idx]),
        peak_timestamp_us=int(ts[peak_idx]),
        baseline=float(np.median(vals[below])),
        duration_above_threshold_us=duration,
        threshold=float(threshold),
    )
