"""Density-driven message rate adaptation.

The inter-transmit time (ITT) grows linearly with the estimated number of
nearby transmitters once it exceeds 25 vehicles within 100 m, saturating at
600 ms. The estimate counts distinct senders decoded within 100 m over the
last second; a ground-truth switch exists for debugging. Transmissions stay
on the vehicle's slot phase, so the realized spacing is ceil(ITT/100) frames.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

ITT_MIN_MS = 100.0
ITT_MAX_MS = 600.0
DENSITY_THRESHOLD = 25
ESTIMATE_WINDOW_MS = 1000.0
NEIGHBOR_RANGE_M = 100.0


@dataclass
class CongestionState:
    """Per-vehicle congestion bookkeeping."""

    estimated_neighbors_100m: int = 0
    current_itt_ms: float = ITT_MIN_MS


def itt_from_density(n: int) -> float:
    """ITT in ms for an estimated count of ``n`` vehicles within 100 m.

    Linear in n above the threshold (4 ms per vehicle), clamped to
    [100, 600] ms.
    """
    if n < 0:
        raise ValueError(f"neighbor count must be >= 0, got {n}")
    return min(ITT_MAX_MS, max(ITT_MIN_MS, ITT_MIN_MS * n / DENSITY_THRESHOLD))


def frames_per_cycle(itt_ms: float) -> int:
    """Transmission spacing in 100 ms frames for a target ITT."""
    return max(1, math.ceil(itt_ms / 100.0))
