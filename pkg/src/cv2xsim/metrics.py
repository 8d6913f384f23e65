"""Inter-packet gap and reception-ratio statistics with distance binning.

IPG samples are kept as dense per-millisecond count histograms per distance
bin, which makes replication merging a plain addition and keeps memory flat
regardless of sample volume. Bins are 20 m wide with centers 10..590 m.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BIN_WIDTH_M = 20.0
N_BINS = 30


def distance_bin(distance_m: float) -> int:
    """Bin index for a pair distance, or -1 when outside the binned range."""
    if distance_m < 0:
        return -1
    idx = int(distance_m // BIN_WIDTH_M)
    return idx if idx < N_BINS else -1


def bin_center(index: int) -> float:
    return BIN_WIDTH_M * index + BIN_WIDTH_M / 2.0


def bin_index_for_center(center_m: float) -> int:
    """Bin whose span contains ``center_m`` (exact multiples round up)."""
    idx = distance_bin(center_m)
    if idx < 0:
        raise ValueError(f"distance {center_m} m outside the binned range")
    return idx


class MetricStore:
    """Per-bin IPG sample counts plus transmit/receive counters.

    ``last_success_ms`` tracks the previous successful reception per (tx, rx)
    pair and is transient: merged stores concatenate disjoint event streams,
    so only the counters and histograms combine.
    """

    def __init__(self, max_ipg_ms: int, n_bins: int = N_BINS):
        if max_ipg_ms < 1:
            raise ValueError("max_ipg_ms must be positive")
        self.max_ipg_ms = int(max_ipg_ms)
        self.n_bins = n_bins
        self.ipg_counts = np.zeros((n_bins, self.max_ipg_ms + 1), dtype=np.int64)
        self.tx_count = np.zeros(n_bins, dtype=np.int64)
        self.rx_success_count = np.zeros(n_bins, dtype=np.int64)
        self.last_success_ms: dict[tuple[int, int], int] = {}

    def record_reception(self, tx: int, rx: int, time_ms: int, distance_m: float) -> None:
        """Record one decoded reception; appends an IPG sample when the pair
        already has a previous success."""
        key = (tx, rx)
        prev = self.last_success_ms.get(key)
        if prev is not None:
            gap = time_ms - prev
            if gap <= 0:
                raise ValueError(f"non-increasing success times for pair {key}")
            b = distance_bin(distance_m)
            if b >= 0:
                self.ipg_counts[b, min(gap, self.max_ipg_ms)] += 1
        self.last_success_ms[key] = time_ms

    def record_gaps(self, bins: np.ndarray, gaps_ms: np.ndarray) -> None:
        """Bulk IPG insertion for pre-paired (bin, gap) samples."""
        if len(bins) == 0:
            return
        np.add.at(self.ipg_counts, (bins, np.minimum(gaps_ms, self.max_ipg_ms)), 1)

    def record_bsm(self, tx_bins_hist: np.ndarray, success_bins: np.ndarray) -> None:
        """Count one transmitted message against every receiver bin and the
        decoded subset."""
        self.tx_count += tx_bins_hist
        if len(success_bins):
            self.rx_success_count += np.bincount(success_bins, minlength=self.n_bins)

    def merge(self, other: "MetricStore") -> None:
        if other.max_ipg_ms != self.max_ipg_ms or other.n_bins != self.n_bins:
            raise ValueError("cannot merge stores with different shapes")
        self.ipg_counts += other.ipg_counts
        self.tx_count += other.tx_count
        self.rx_success_count += other.rx_success_count

    def ipg_sample_count(self, bin_index: int) -> int:
        return int(self.ipg_counts[bin_index].sum())

    def populated_bins(self) -> list[int]:
        return [b for b in range(self.n_bins) if self.tx_count[b] > 0]


@dataclass
class Ccdf:
    """Empirical complement CDF: fraction of samples strictly above each value."""

    values: np.ndarray
    fractions: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.fractions = np.asarray(self.fractions, dtype=float)
        if len(self.values) != len(self.fractions):
            raise ValueError("values and fractions length mismatch")
        if np.any(np.diff(self.values) <= 0):
            raise ValueError("values must be strictly increasing")

    def fraction_above(self, threshold: float) -> float:
        """P(sample > threshold); 1 below the smallest sample."""
        idx = np.searchsorted(self.values, threshold, side="right") - 1
        if idx < 0:
            return 1.0
        return float(self.fractions[idx])

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.fractions.tolist()))


def ccdf(store: MetricStore, bin_index: int) -> Ccdf:
    """CCDF of the IPG samples in one distance bin."""
    counts = store.ipg_counts[bin_index]
    total = counts.sum()
    if total == 0:
        raise ValueError(f"no IPG samples in bin {bin_index}")
    values = np.nonzero(counts)[0]
    above = total - np.cumsum(counts[values])
    return Ccdf(values.astype(float), above / total)


def prr(store: MetricStore, bin_index: int) -> float:
    """Fraction of transmitted messages decoded at pairs in the bin."""
    denom = store.tx_count[bin_index]
    if denom == 0:
        raise ValueError(f"no transmissions recorded in bin {bin_index}")
    return float(store.rx_success_count[bin_index] / denom)


def fit_log10_slope(x: np.ndarray, y: np.ndarray) -> float:
    """Least-squares slope of log10(y) against x; y must be positive."""
    return float(np.polyfit(x, np.log10(y), 1)[0])


def tail_slope(curve: Ccdf, fit_lo_ms: float, fit_hi_ms: float) -> float:
    """Log10 CCDF slope per 100 ms over [fit_lo_ms, fit_hi_ms].

    Uses the CCDF points at distinct sample values with positive fraction;
    requires at least three such points in the range.
    """
    sel = (curve.values >= fit_lo_ms) & (curve.values <= fit_hi_ms) & (curve.fractions > 0)
    if sel.sum() < 3:
        raise ValueError(
            f"need >= 3 positive CCDF points in [{fit_lo_ms}, {fit_hi_ms}] ms, "
            f"got {int(sel.sum())}"
        )
    return fit_log10_slope(curve.values[sel] / 100.0, curve.fractions[sel])
