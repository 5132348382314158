"""Coincidence counting and cross-correlation histograms of two tag streams."""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np


@dataclass(frozen=True)
class CoincidenceResult:
    window_ps: float
    count: int
    duration_s: float

    @property
    def rate_hz(self) -> float:
        return self.count / self.duration_s


@dataclass(frozen=True)
class Histogram:
    bin_width_ps: int
    span_ps: int
    counts: np.ndarray

    @property
    def centers_ps(self) -> np.ndarray:
        n = self.counts.size
        return (np.arange(n) - (n - 1) / 2) * self.bin_width_ps


@numba.njit(cache=True)
def _merge_count(a, b, window2):
    # window2 = full window; |ta - tb| <= window/2  <=>  2|ta - tb| <= window
    i = 0
    j = 0
    n = 0
    while i < a.size and j < b.size:
        d = 2 * (a[i] - b[j])
        if d > window2:
            j += 1
        elif -d > window2:
            i += 1
        else:
            n += 1
            i += 1
            j += 1
    return n


def _as_sorted(tags, name):
    arr = np.ascontiguousarray(tags, dtype=np.int64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.size > 1 and np.any(np.diff(arr) < 0):
        raise ValueError(f"{name} is not sorted")
    return arr


def count_coincidences(a, b, window_ps: float, duration_s: float = 1.0) -> CoincidenceResult:
    """One-to-one coincidences with |t_a - t_b| <= window_ps / 2.

    A single forward merge: the earlier unmatched tag is discarded as soon as
    it can no longer be matched, otherwise the two current tags are paired.
    On a line this greedy pairing is a maximum matching.
    """
    a = _as_sorted(a, "first stream")
    b = _as_sorted(b, "second stream")
    if window_ps < 0:
        raise ValueError("window must be non-negative")
    return CoincidenceResult(window_ps, int(_merge_count(a, b, float(window_ps))), duration_s)


def correlation_histogram(a, b, bin_ps: int, span_ps: int) -> Histogram:
    """Histogram of all differences t_b - t_a with |t_b - t_a| <= span/2."""
    a = _as_sorted(a, "first stream")
    b = _as_sorted(b, "second stream")
    if bin_ps <= 0 or span_ps <= 0 or span_ps % bin_ps:
        raise ValueError("bin width must be positive and divide the span")
    half = span_ps / 2
    lo = np.searchsorted(b, a - half, side="left")
    hi = np.searchsorted(b, a + half, side="right")
    n_per = hi - lo
    total = int(n_per.sum())
    if total:
        starts = np.repeat(lo - np.cumsum(n_per) + n_per, n_per)
        idx = np.arange(total) + starts
        diffs = b[idx] - np.repeat(a, n_per)
    else:
        diffs = np.zeros(0, dtype=np.int64)
    nbins = span_ps // bin_ps
    k = np.floor((diffs + half) / bin_ps).astype(np.int64)
    k[k == nbins] = nbins - 1  # +span/2 belongs to the last bin
    return Histogram(bin_ps, span_ps, np.bincount(k, minlength=nbins))
