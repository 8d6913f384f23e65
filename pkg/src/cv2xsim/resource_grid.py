"""Time-frequency resource pool geometry for sidelink broadcast transmissions.

A transmission occupies one "slot": two contiguous VRBs (20 PRBs) inside a
single 1 ms subframe. Slots are fixed, aligned, non-overlapping VRB pairs;
with an odd number of VRBs per subframe the last VRB is left unused. The
frame is 100 subframes (one 100 ms message period) and wraps circularly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# PRBs per slot are bandwidth-independent: 2 VRBs of 10 PRBs each, with the
# first 2 PRBs carrying the control channel (SCI) and the rest the data.
VRB_SIZE_PRBS = 10
SLOT_SIZE_VRBS = 2
SLOT_SIZE_PRBS = SLOT_SIZE_VRBS * VRB_SIZE_PRBS
SCI_PRBS = 2
DATA_PRBS = SLOT_SIZE_PRBS - SCI_PRBS

SUBFRAMES_PER_FRAME = 100
HARQ_HALF_WINDOW = 15

_PRBS_BY_BANDWIDTH = {10: 50, 20: 100}


def circular_distance(a: int, b: int, modulus: int = SUBFRAMES_PER_FRAME) -> int:
    """Shortest distance between two indices on a ring of size ``modulus``."""
    d = (a - b) % modulus
    return min(d, modulus - d)


def circular_delta(a: int, b: int, modulus: int = SUBFRAMES_PER_FRAME) -> int:
    """Signed shortest offset from ``b`` to ``a`` on the ring, in [-mod/2, mod/2)."""
    half = modulus // 2
    return (a - b + half) % modulus - half


@dataclass(frozen=True)
class TxSlotId:
    """One transmission slot: a (subframe, VRB-pair) coordinate."""

    subframe: int
    pair_index: int


@dataclass(frozen=True)
class ResourcePool:
    """Resource pool for one carrier bandwidth.

    ``pairs_per_subframe`` counts the non-overlapping aligned VRB pairs, so a
    50-PRB (10 MHz) subframe holds 2 slots and a 100-PRB (20 MHz) one holds 5.
    """

    bandwidth_mhz: int
    prbs_per_subframe: int
    subframes_per_frame: int = SUBFRAMES_PER_FRAME

    def __post_init__(self):
        if self.prbs_per_subframe % VRB_SIZE_PRBS != 0:
            raise ValueError(
                f"prbs_per_subframe={self.prbs_per_subframe} is not a multiple "
                f"of the VRB size ({VRB_SIZE_PRBS})"
            )

    @classmethod
    def from_bandwidth(cls, bandwidth_mhz: int) -> "ResourcePool":
        try:
            prbs = _PRBS_BY_BANDWIDTH[int(bandwidth_mhz)]
        except KeyError:
            raise ValueError(
                f"unsupported bandwidth {bandwidth_mhz} MHz; expected one of "
                f"{sorted(_PRBS_BY_BANDWIDTH)}"
            ) from None
        return cls(bandwidth_mhz=int(bandwidth_mhz), prbs_per_subframe=prbs)

    @property
    def vrbs_per_subframe(self) -> int:
        return self.prbs_per_subframe // VRB_SIZE_PRBS

    @property
    def pairs_per_subframe(self) -> int:
        return self.vrbs_per_subframe // SLOT_SIZE_VRBS

    def slot_index(self, slot: TxSlotId) -> int:
        """Flat index of a slot; inverse of :meth:`slot_at`."""
        if not (0 <= slot.subframe < self.subframes_per_frame):
            raise ValueError(f"subframe {slot.subframe} out of range")
        if not (0 <= slot.pair_index < self.pairs_per_subframe):
            raise ValueError(f"pair_index {slot.pair_index} out of range")
        return slot.subframe * self.pairs_per_subframe + slot.pair_index

    def slot_at(self, index: int) -> TxSlotId:
        if not (0 <= index < slot_count(self)):
            raise ValueError(f"slot index {index} out of range")
        return TxSlotId(index // self.pairs_per_subframe, index % self.pairs_per_subframe)

    def subframe_of(self, index: int) -> int:
        return index // self.pairs_per_subframe

    def pair_of(self, index: int) -> int:
        return index % self.pairs_per_subframe

    def all_subframes(self) -> np.ndarray:
        """Subframe of every flat slot index, shape (slot_count,)."""
        return np.arange(slot_count(self)) // self.pairs_per_subframe


def slot_count(pool: ResourcePool) -> int:
    """Total transmission slots in one frame of the pool."""
    return pool.subframes_per_frame * pool.pairs_per_subframe


def harq_window(
    initial: TxSlotId,
    pool: ResourcePool,
    half_width: int = HARQ_HALF_WINDOW,
) -> set[TxSlotId]:
    """All slots usable for the redundant attempt of a message sent on ``initial``.

    The window covers every slot whose subframe is within ``half_width``
    subframes of the initial subframe (circularly over the frame), excluding
    the initial subframe itself so the two attempts always occupy different
    subframes.
    """
    pool.slot_index(initial)  # bounds check
    out = set()
    for sf in harq_window_subframes(initial.subframe, pool, half_width):
        for pair in range(pool.pairs_per_subframe):
            out.add(TxSlotId(int(sf), pair))
    return out


def harq_window_subframes(
    subframe: int,
    pool: ResourcePool,
    half_width: int = HARQ_HALF_WINDOW,
) -> np.ndarray:
    """Subframes inside the retransmission window around ``subframe``."""
    n = pool.subframes_per_frame
    all_sf = np.arange(n)
    dist = np.minimum((all_sf - subframe) % n, (subframe - all_sf) % n)
    return all_sf[(dist <= half_width) & (all_sf != subframe)]


def harq_window_mask(pool: ResourcePool, half_width: int = HARQ_HALF_WINDOW) -> np.ndarray:
    """Boolean mask (subframes_per_frame, slot_count): window membership per
    initial subframe. Row s marks every slot a message on subframe s may use
    for its redundant attempt."""
    n_sf = pool.subframes_per_frame
    slot_sf = pool.all_subframes()
    mask = np.zeros((n_sf, slot_count(pool)), dtype=bool)
    for s in range(n_sf):
        dist = np.minimum((slot_sf - s) % n_sf, (s - slot_sf) % n_sf)
        mask[s] = (dist <= half_width) & (slot_sf != s)
    return mask
