"""Per-vehicle semi-persistent scheduling with one-shot excursions.

Each vehicle keeps a persistent slot plus a retransmission slot inside the
±15-subframe window. Two counters decrement once per message event (the
regular attempt and its retransmission count as one): when the persistent
counter expires the slot is kept with probability p_keep, otherwise reselected
from the candidate list; when the one-shot counter expires the next message
goes out on a freshly picked slot and the vehicle then returns to its saved
slot. Candidates are the lowest-energy 20% of slots from a 1 s sensing
window, skipping subframes the vehicle itself transmitted in (it could not
listen there).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .resource_grid import (
    HARQ_HALF_WINDOW,
    ResourcePool,
    harq_window_mask,
    slot_count,
)

SENSING_WINDOW_FRAMES = 10
CANDIDATE_FRACTION = 0.2


@dataclass(frozen=True)
class CounterConfig:
    """Counter redraw range [alpha, beta] and the keep probability applied
    when the persistent counter expires (one-shot configs use keep 0)."""

    alpha: int
    beta: int
    keep_probability: float = 0.0
    enabled: bool = True

    def __post_init__(self):
        if not self.enabled:
            return
        if self.alpha < 1:
            raise ValueError(f"alpha must be >= 1, got {self.alpha}")
        if self.beta < self.alpha:
            raise ValueError(f"beta ({self.beta}) must be >= alpha ({self.alpha})")
        if not 0.0 <= self.keep_probability <= 1.0:
            raise ValueError(f"keep_probability must be in [0, 1], got {self.keep_probability}")

    @classmethod
    def disabled(cls) -> "CounterConfig":
        return cls(alpha=0, beta=0, enabled=False)

    @property
    def reselect_probability(self) -> float:
        return 1.0 - self.keep_probability


def draw_counter(cfg: CounterConfig, rng: np.random.Generator) -> int:
    """Uniform counter draw from [alpha, beta] inclusive."""
    if not cfg.enabled:
        raise ValueError("cannot draw a counter from a disabled config")
    return int(rng.integers(cfg.alpha, cfg.beta + 1))


def expected_reselection_interval(cfg: CounterConfig) -> float:
    """Mean message events between reselections: (alpha + (beta-alpha)/2) / p_resel."""
    p = cfg.reselect_probability
    if p <= 0.0:
        raise ValueError("keep_probability of 1 never reselects; interval is infinite")
    return (cfg.alpha + (cfg.beta - cfg.alpha) / 2.0) / p


class SensingHistory:
    """Sliding per-slot energy record over the last sensing-window frames.

    ``energy`` holds one row per window frame (ring-indexed by the owner) and
    one column per slot; ``own_tx`` marks the subframes this vehicle
    transmitted in per window frame. The owner zeroes the ring row entering a
    new frame and advances ``frames_observed``.
    """

    def __init__(self, energy: np.ndarray, own_tx: np.ndarray):
        self.energy = energy
        self.own_tx = own_tx
        self.frames_observed = 0

    @classmethod
    def standalone(cls, n_slots: int, n_subframes: int = 100) -> "SensingHistory":
        return cls(
            np.zeros((SENSING_WINDOW_FRAMES, n_slots), dtype=np.float32),
            np.zeros((SENSING_WINDOW_FRAMES, n_subframes), dtype=bool),
        )

    def average_energy(self) -> np.ndarray:
        frames = min(max(self.frames_observed, 1), self.energy.shape[0])
        return self.energy.sum(axis=0) / frames

    def unsensed_subframes(self) -> np.ndarray:
        """Subframes with no measurements inside the window (own transmissions)."""
        return self.own_tx.any(axis=0)


@dataclass
class SchedulerState:
    """Mutable scheduling state of one vehicle.

    Slots are flat pool indices; ``saved_slot`` is set exactly while a
    one-shot excursion is in progress.
    """

    sps_counter: int
    oneshot_counter: Optional[int]
    current_slot: int
    harq_slot: int
    sensing: SensingHistory
    saved_slot: Optional[int] = None


@dataclass(frozen=True)
class CandidateList:
    """Slot ids ordered by ascending sensed energy (ties by slot index)."""

    slot_ids: np.ndarray
    energies: np.ndarray

    def __len__(self) -> int:
        return len(self.slot_ids)


def build_candidate_list(
    state: SchedulerState,
    pool: ResourcePool,
    fraction: float = CANDIDATE_FRACTION,
) -> CandidateList:
    """Lowest-energy candidate slots from the vehicle's sensing history.

    Slots in subframes the vehicle transmitted in during the window are
    excluded; with no history at all (cold start) every slot is a candidate.
    """
    n_slots = slot_count(pool)
    sensing = state.sensing
    if sensing.frames_observed == 0:
        ids = np.arange(n_slots)
        return CandidateList(ids, np.zeros(n_slots, dtype=np.float32))
    energy = sensing.average_energy().astype(np.float64, copy=True)
    blocked_sf = sensing.unsensed_subframes()
    slot_sf = pool.all_subframes()
    energy[blocked_sf[slot_sf]] = np.inf
    size = min(math.ceil(fraction * n_slots), int(np.isfinite(energy).sum()))
    order = np.lexsort((np.arange(n_slots), energy))
    chosen = order[:size]
    return CandidateList(chosen, energy[chosen].astype(np.float32))


@dataclass(frozen=True)
class SchedulerTransition:
    """What happened at one message-event boundary."""

    restored: bool = False
    oneshot_started: bool = False
    sps_expired: bool = False
    sps_reselected: bool = False


def _pick(ids: np.ndarray, rng: np.random.Generator) -> int:
    return int(ids[rng.integers(len(ids))])


def _pick_harq(
    current_slot: int,
    candidates: CandidateList,
    pool: ResourcePool,
    window_mask: np.ndarray,
    rng: np.random.Generator,
) -> int:
    """Retransmission slot from candidate slots inside the window around the
    active slot, falling back to the whole window when they do not meet."""
    row = window_mask[pool.subframe_of(current_slot)]
    in_window = candidates.slot_ids[row[candidates.slot_ids]]
    if len(in_window) == 0:
        in_window = np.nonzero(row)[0]
    return _pick(in_window, rng)


def initial_state(
    pool: ResourcePool,
    sps_cfg: CounterConfig,
    oneshot_cfg: Optional[CounterConfig],
    sensing: SensingHistory,
    rng: np.random.Generator,
    window_mask: Optional[np.ndarray] = None,
) -> SchedulerState:
    """Cold-start state: uniform slot, window-uniform retransmission slot,
    freshly drawn counters."""
    if window_mask is None:
        window_mask = harq_window_mask(pool, HARQ_HALF_WINDOW)
    current = int(rng.integers(slot_count(pool)))
    harq = _pick(np.nonzero(window_mask[pool.subframe_of(current)])[0], rng)
    oneshot_enabled = oneshot_cfg is not None and oneshot_cfg.enabled
    return SchedulerState(
        sps_counter=draw_counter(sps_cfg, rng),
        oneshot_counter=draw_counter(oneshot_cfg, rng) if oneshot_enabled else None,
        current_slot=current,
        harq_slot=harq,
        sensing=sensing,
    )


def on_bsm_transmitted(
    state: SchedulerState,
    sps_cfg: CounterConfig,
    oneshot_cfg: Optional[CounterConfig],
    pool: ResourcePool,
    rng: np.random.Generator,
    window_mask: Optional[np.ndarray] = None,
) -> SchedulerTransition:
    """Advance the scheduler after one message event (attempt pair).

    Order on simultaneous triggers: restore from a finished one-shot first,
    then a newly expired one-shot, then the persistent counter. A persistent
    reselection fired while an excursion is in progress retargets the saved
    slot (the slot the vehicle will return to). Every reselection redraws the
    retransmission slot relative to the active slot.
    """
    if window_mask is None:
        window_mask = harq_window_mask(pool, HARQ_HALF_WINDOW)

    candidates: Optional[CandidateList] = None

    def cands() -> CandidateList:
        nonlocal candidates
        if candidates is None:
            candidates = build_candidate_list(state, pool)
        return candidates

    restored = False
    oneshot_started = False
    sps_expired = False
    sps_reselected = False
    reselected = False

    # The message just sent was the one-shot: return to the saved slot.
    if state.saved_slot is not None:
        state.current_slot = state.saved_slot
        state.saved_slot = None
        restored = True
        reselected = True

    oneshot_enabled = oneshot_cfg is not None and oneshot_cfg.enabled
    if oneshot_enabled:
        state.oneshot_counter -= 1
        if state.oneshot_counter == 0:
            state.saved_slot = state.current_slot
            state.current_slot = _pick(cands().slot_ids, rng)
            state.oneshot_counter = draw_counter(oneshot_cfg, rng)
            oneshot_started = True
            reselected = True

    state.sps_counter -= 1
    if state.sps_counter == 0:
        sps_expired = True
        if rng.random() < sps_cfg.reselect_probability:
            sps_reselected = True
            new_slot = _pick(cands().slot_ids, rng)
            if state.saved_slot is not None:
                state.saved_slot = new_slot
            else:
                state.current_slot = new_slot
                reselected = True
        state.sps_counter = draw_counter(sps_cfg, rng)

    if reselected:
        state.harq_slot = _pick_harq(state.current_slot, cands(), pool, window_mask, rng)

    return SchedulerTransition(
        restored=restored,
        oneshot_started=oneshot_started,
        sps_expired=sps_expired,
        sps_reselected=sps_reselected,
    )
