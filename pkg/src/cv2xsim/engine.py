"""Slotted Monte Carlo driver for the highway broadcast scenario.

Time advances in 1 ms subframes. Vehicles are dropped once per replication
from a Poisson process along a single lane and stay put; every vehicle
broadcasts periodic messages on its scheduled slot (plus the redundant
attempt when retransmissions are on), receivers accumulate per-attempt SINRs
and decode after the later attempt. Statistics come from transmitters in the
middle third of the highway after the warm-up, which trims boundary effects.

Inside a subframe all powers are per-PRB densities. The control-channel SINR
is the boosted data SINR (identical interference mix on both channels), so
the decode test reduces to one effective threshold per attempt; the channel
module keeps the general two-channel form and the test suite cross-checks
the two paths.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import congestion, metrics, sps
from .channel import ChannelConfig
from .resource_grid import ResourcePool, circular_delta, harq_window_mask, slot_count

ATTEMPT_REGULAR = "regular"
ATTEMPT_HARQ = "harq"
ATTEMPT_ONESHOT = "oneshot"
ATTEMPT_ONESHOT_HARQ = "oneshot_harq"


@dataclass(frozen=True)
class ScenarioConfig:
    """Scenario geometry, timing and replication bookkeeping."""

    highway_length_m: float = 5000.0
    density_vue_per_km: float = 125.0
    sim_time_s: float = 500.0
    warmup_s: float = 10.0
    seed: int = 1
    replications: int = 1
    ground_truth_neighbors: bool = False

    def __post_init__(self):
        if self.density_vue_per_km <= 0:
            raise ValueError("density must be positive")
        if self.warmup_s >= self.sim_time_s:
            raise ValueError("warmup must be shorter than the simulation time")


@dataclass(frozen=True)
class SimEvent:
    time_ms: int
    tx_id: int
    rx_id: Optional[int]
    slot: int
    attempt: str
    decoded: Optional[bool]
    tx_rx_distance_m: Optional[float]


@dataclass
class EventLog:
    """Transmission and decoded-reception events, for small-scale runs only."""

    attempts: list = field(default_factory=list)
    receptions: list = field(default_factory=list)


@dataclass
class ReplicationResult:
    metrics: metrics.MetricStore
    itt_gap_counts: Counter
    n_vehicles: int
    positions: np.ndarray
    events: Optional[EventLog] = None


def replication_seed(master_seed: int, replication_index: int) -> np.random.SeedSequence:
    """Independent, reproducible stream for one replication."""
    return np.random.SeedSequence(entropy=master_seed, spawn_key=(replication_index,))


def run_replication(
    scenario: ScenarioConfig,
    pool: ResourcePool,
    channel_cfg: ChannelConfig,
    sps_cfg: sps.CounterConfig,
    oneshot_cfg: Optional[sps.CounterConfig],
    harq_enabled: bool,
    rng_seed,
    record_events: bool = False,
) -> ReplicationResult:
    """Run one independent replication and return its statistics."""
    return _Replication(
        scenario, pool, channel_cfg, sps_cfg, oneshot_cfg, harq_enabled, rng_seed, record_events
    ).run()


class _Replication:
    def __init__(self, scenario, pool, channel_cfg, sps_cfg, oneshot_cfg, harq, rng_seed, record_events):
        self.scenario = scenario
        self.pool = pool
        self.cfg = channel_cfg
        self.sps_cfg = sps_cfg
        self.oneshot_cfg = oneshot_cfg if (oneshot_cfg is not None and oneshot_cfg.enabled) else None
        self.harq_enabled = harq
        self.rng = np.random.default_rng(rng_seed)
        self.record_events = record_events
        self.events = EventLog() if record_events else None

        self.sim_ms = int(round(scenario.sim_time_s * 1000))
        self.warmup_ms = int(round(scenario.warmup_s * 1000))
        self.n_slots = slot_count(pool)
        self.pairs = pool.pairs_per_subframe

        self._setup_vehicles()
        self._setup_radio()
        self._setup_scheduling()

    # -- setup -------------------------------------------------------------

    def _setup_vehicles(self):
        sc = self.scenario
        n = int(self.rng.poisson(sc.density_vue_per_km * sc.highway_length_m / 1000.0))
        n = max(n, 2)  # a lone vehicle has nothing to receive from
        self.n = n
        self.positions = np.sort(self.rng.random(n) * sc.highway_length_m)
        lo, hi = sc.highway_length_m / 3.0, 2.0 * sc.highway_length_m / 3.0
        self.middle = (self.positions >= lo) & (self.positions < hi)

    def _setup_radio(self):
        cfg = self.cfg
        x = self.positions
        dist = np.abs(x[:, None] - x[None, :]).astype(np.float32)
        self.dist = dist
        # PSD gain per PRB: 1/pathloss, zeroed at self and beyond the
        # interference cutoff. Sub-metre separations are clamped to 1 m.
        loss_db = cfg.pathloss.loss_db(np.maximum(dist, 1.0))
        gain = (10.0 ** (-loss_db / 10.0)).astype(np.float32)
        np.fill_diagonal(gain, 0.0)
        gain[dist > cfg.max_range_m] = 0.0
        self.gain = gain
        self.m_shape = cfg.nakagami_m(dist).astype(np.float32)
        self.psd = np.float32(cfg.data_psd_mw)
        self.noise = np.float32(cfg.noise_psd_mw)
        # Both decode thresholds act on the same MRC data SINR because the
        # control SINR is exactly boost * data SINR here.
        self.thr_eff = np.float32(
            max(cfg.threshold_pssch_linear, cfg.threshold_pscch_linear / cfg.pscch_boost_linear)
        )
        self.mask_lin = np.array(
            [cfg.emission_attenuation_linear(k) for k in range(self.pairs)], dtype=np.float32
        )

        bins = np.floor(dist / metrics.BIN_WIDTH_M).astype(np.int16)
        bins[(bins < 0) | (bins >= metrics.N_BINS)] = -1
        np.fill_diagonal(bins, -1)
        self.bins = bins
        self.valid_bins = bins >= 0
        # Per-transmitter receiver-bin histogram: the PRR denominator of one
        # message, added once per resolved message.
        self.hist_tx = np.zeros((self.n, metrics.N_BINS), dtype=np.int64)
        for v in np.nonzero(self.middle)[0]:
            row = bins[v][self.valid_bins[v]]
            self.hist_tx[v] = np.bincount(row, minlength=metrics.N_BINS)

        self.true_count = (dist <= congestion.NEIGHBOR_RANGE_M).sum(axis=1).astype(np.int64) - 1
        self.last_heard = np.full((self.n, self.n), -1.0e9, dtype=np.float32)
        self.last_success = np.full((self.n, self.n), -1, dtype=np.int32)

    def _setup_scheduling(self):
        self.window_mask = harq_window_mask(self.pool)
        self.slot_subframe = self.pool.all_subframes()
        self.energy_ring = np.zeros((self.n, sps.SENSING_WINDOW_FRAMES, self.n_slots), dtype=np.float32)
        self.own_tx_ring = np.zeros(
            (self.n, sps.SENSING_WINDOW_FRAMES, self.pool.subframes_per_frame), dtype=bool
        )
        self.states = []
        for v in range(self.n):
            sensing = sps.SensingHistory(self.energy_ring[v], self.own_tx_ring[v])
            self.states.append(
                sps.initial_state(
                    self.pool, self.sps_cfg, self.oneshot_cfg, sensing, self.rng, self.window_mask
                )
            )

        self.store = metrics.MetricStore(max_ipg_ms=self.sim_ms)
        self.itt_gaps = Counter()
        self.schedule: dict[int, list] = {}
        self.buf_first = np.zeros((self.n, self.n), dtype=np.float32)
        self.pend_first_t = np.zeros(self.n, dtype=np.int32)
        self.pend_has_first = np.zeros(self.n, dtype=bool)
        self.pend_frame = np.zeros(self.n, dtype=np.int64)
        self.cong = [congestion.CongestionState() for _ in range(self.n)]
        for v in range(self.n):
            self._schedule_cycle(v, 0)

    # -- per-cycle scheduling ----------------------------------------------

    def _schedule_cycle(self, tx: int, frame: int) -> None:
        state = self.states[tx]
        oneshot_active = state.saved_slot is not None
        sf_reg = self.pool.subframe_of(state.current_slot)
        t_reg = frame * 100 + sf_reg
        kind_reg = ATTEMPT_ONESHOT if oneshot_active else ATTEMPT_REGULAR

        if not self.harq_enabled:
            if t_reg >= self.sim_ms:
                return
            self.pend_frame[tx] = frame
            self.pend_has_first[tx] = False
            self._push(t_reg, (tx, state.current_slot, True, kind_reg))
            return

        kind_harq = ATTEMPT_ONESHOT_HARQ if oneshot_active else ATTEMPT_HARQ
        delta = circular_delta(self.pool.subframe_of(state.harq_slot), sf_reg)
        t_harq = t_reg + delta
        t_final = max(t_reg, t_harq)
        if t_final >= self.sim_ms:
            return
        self.pend_frame[tx] = frame
        if t_harq < 0:  # window wrapped before t=0: the early attempt never airs
            self.pend_has_first[tx] = False
            self._push(t_reg, (tx, state.current_slot, True, kind_reg))
            return
        if t_reg < t_harq:
            first = (tx, state.current_slot, False, kind_reg)
            second = (tx, state.harq_slot, True, kind_harq)
            t_first = t_reg
        else:
            first = (tx, state.harq_slot, False, kind_harq)
            second = (tx, state.current_slot, True, kind_reg)
            t_first = t_harq
        self.pend_has_first[tx] = True
        self.pend_first_t[tx] = t_first
        self._push(t_first, first)
        self._push(t_final, second)

    def _push(self, t: int, entry) -> None:
        self.schedule.setdefault(t, []).append(entry)

    # -- main loop -----------------------------------------------------------

    def run(self) -> ReplicationResult:
        window = sps.SENSING_WINDOW_FRAMES
        for t in range(self.sim_ms):
            if t % 100 == 0:
                frame = t // 100
                fmod = frame % window
                self.energy_ring[:, fmod, :] = 0.0
                self.own_tx_ring[:, fmod, :] = False
                observed = min(frame + 1, window)
                for st in self.states:
                    st.sensing.frames_observed = observed
            entries = self.schedule.pop(t, None)
            if entries:
                self._process_subframe(t, entries)
        return ReplicationResult(
            metrics=self.store,
            itt_gap_counts=self.itt_gaps,
            n_vehicles=self.n,
            positions=self.positions,
            events=self.events,
        )

    def _process_subframe(self, t: int, entries) -> None:
        n_tx = len(entries)
        tx_ids = np.fromiter((e[0] for e in entries), dtype=np.int64, count=n_tx)
        slots = np.fromiter((e[1] for e in entries), dtype=np.int64, count=n_tx)
        fmod = (t // 100) % sps.SENSING_WINDOW_FRAMES
        sf = t % 100

        # Sensing: non-transmitting vehicles accumulate the slot's received
        # density (path loss only); transmitters cannot listen this subframe.
        for j in range(n_tx):
            contrib = self.psd * self.gain[tx_ids[j]]
            contrib[tx_ids] = 0.0
            self.energy_ring[:, fmod, slots[j]] += contrib
        self.own_tx_ring[tx_ids, fmod, sf] = True

        # Block fading per (transmitter, receiver, antenna) this subframe; a
        # transmission is the same realization as signal and as interference.
        m = self.m_shape[tx_ids][:, :, None]
        fades = self.rng.standard_gamma(
            np.broadcast_to(m, (n_tx, self.n, 2)), dtype=np.float32
        )
        fades /= m
        psd_rx = self.psd * self.gain[tx_ids][:, :, None] * fades

        pair_idx = slots % self.pairs
        mrc_all = []
        for j in range(n_tx):
            den = np.full((self.n, 2), self.noise, dtype=np.float32)
            for j2 in range(n_tx):
                if j2 == j:
                    continue
                den += psd_rx[j2] * self.mask_lin[abs(int(pair_idx[j]) - int(pair_idx[j2]))]
            mrc = (psd_rx[j] / den).sum(axis=1)
            mrc[tx_ids] = 0.0  # half-duplex receivers (and self)
            mrc_all.append(mrc)

        if self.record_events:
            for j, (tx, slot, _final, kind) in enumerate(entries):
                self.events.attempts.append(SimEvent(t, int(tx), None, int(slot), kind, None, None))

        for j, (tx, slot, final, kind) in enumerate(entries):
            if final:
                self._finalize_bsm(int(tx), t, mrc_all[j], int(slot), kind)
            else:
                self.buf_first[tx] = mrc_all[j]

    # -- message resolution --------------------------------------------------

    def _finalize_bsm(self, tx: int, t: int, mrc2: np.ndarray, slot: int, kind: str) -> None:
        if self.pend_has_first[tx]:
            mrc1 = self.buf_first[tx]
            # Either attempt passing implies the combined sum passes, so the
            # chase-combined test decides; the first attempt only sets timing.
            pass1 = mrc1 >= self.thr_eff
            decoded = (mrc1 + mrc2) >= self.thr_eff
            t_dec = np.where(pass1, self.pend_first_t[tx], t).astype(np.int64)
        else:
            decoded = mrc2 >= self.thr_eff
            t_dec = np.full(self.n, t, dtype=np.int64)

        near = self.dist[tx] <= congestion.NEIGHBOR_RANGE_M
        heard = decoded & near
        if heard.any():
            self.last_heard[heard, tx] = t

        if self.middle[tx] and t >= self.warmup_ms:
            sel = decoded & self.valid_bins[tx]
            sel_idx = np.nonzero(sel)[0]
            self.store.record_bsm(self.hist_tx[tx], self.bins[tx][sel_idx])
            last = self.last_success[tx, sel_idx]
            have_prior = last >= 0
            self.store.record_gaps(
                self.bins[tx][sel_idx][have_prior],
                (t_dec[sel_idx][have_prior] - last[have_prior]).astype(np.int64),
            )
            self.last_success[tx, sel_idx] = t_dec[sel_idx]

        if self.record_events:
            for rx in np.nonzero(decoded)[0]:
                self.events.receptions.append(
                    SimEvent(
                        int(t_dec[rx]), tx, int(rx), slot, kind, True,
                        float(self.dist[tx, rx]),
                    )
                )

        sps.on_bsm_transmitted(
            self.states[tx], self.sps_cfg, self.oneshot_cfg, self.pool, self.rng, self.window_mask
        )

        if self.scenario.ground_truth_neighbors:
            n_est = int(self.true_count[tx])
        else:
            n_est = int(np.count_nonzero(self.last_heard[tx] > t - congestion.ESTIMATE_WINDOW_MS))
        itt = congestion.itt_from_density(n_est)
        cong = self.cong[tx]
        cong.estimated_neighbors_100m = n_est
        cong.current_itt_ms = itt
        frames_next = congestion.frames_per_cycle(itt)
        if self.middle[tx] and t >= self.warmup_ms:
            self.itt_gaps[frames_next * 100] += 1
        self._schedule_cycle(tx, int(self.pend_frame[tx]) + frames_next)


def merge_replications(results: list[ReplicationResult]) -> tuple[metrics.MetricStore, Counter]:
    """Combine replications (order-independent for the counters/histograms)."""
    if not results:
        raise ValueError("no replications to merge")
    merged = metrics.MetricStore(max_ipg_ms=results[0].metrics.max_ipg_ms)
    gaps: Counter = Counter()
    for r in results:
        merged.merge(r.metrics)
        gaps.update(r.itt_gap_counts)
    return merged, gaps
