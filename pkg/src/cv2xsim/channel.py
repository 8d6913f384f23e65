"""Radio channel model: dual-slope path loss, Nakagami-m block fading,
in-band emission leakage, two-antenna MRC reception and HARQ combining.

Powers inside SINR computations are per-PRB spectral densities, so control
(SCI) and data ratios stay consistent across bandwidths: a slot always spans
20 PRBs with 2 control PRBs, and both the target and every interferer use the
same layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .resource_grid import DATA_PRBS, SCI_PRBS

SPEED_OF_LIGHT = 2.998e8
PRB_BANDWIDTH_HZ = 180e3
THERMAL_NOISE_DBM_PER_HZ = -174.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class PathlossParams:
    """Dual-slope log-distance model with a breakpoint.

    Defaults follow a UHF street-level model: free-space reference at 1 m,
    exponent 2 up to the breakpoint 4*h_tx*h_rx*f/c and exponent 4 beyond.
    """

    ref_distance_m: float
    ref_loss_db: float
    exponent_near: float
    exponent_far: float
    breakpoint_m: float

    @classmethod
    def for_carrier(cls, carrier_ghz: float, antenna_height_m: float = 1.5) -> "PathlossParams":
        f_hz = carrier_ghz * 1e9
        ref_loss = 20.0 * math.log10(4.0 * math.pi * 1.0 * f_hz / SPEED_OF_LIGHT)
        breakpoint = 4.0 * antenna_height_m * antenna_height_m * f_hz / SPEED_OF_LIGHT
        return cls(
            ref_distance_m=1.0,
            ref_loss_db=ref_loss,
            exponent_near=2.0,
            exponent_far=4.0,
            breakpoint_m=breakpoint,
        )

    def loss_db(self, distance_m):
        """Path loss in dB; accepts scalars or arrays of distances > 0."""
        d = np.asarray(distance_m, dtype=float)
        near = self.ref_loss_db + 10.0 * self.exponent_near * np.log10(
            np.maximum(d, self.ref_distance_m) / self.ref_distance_m
        )
        loss_at_bp = self.ref_loss_db + 10.0 * self.exponent_near * math.log10(
            self.breakpoint_m / self.ref_distance_m
        )
        far = loss_at_bp + 10.0 * self.exponent_far * np.log10(
            np.maximum(d, self.breakpoint_m) / self.breakpoint_m
        )
        out = np.where(d <= self.breakpoint_m, near, far)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class ChannelConfig:
    """Radio parameters. Thresholds and boost in dB, powers in dBm."""

    tx_power_dbm: float = 20.0
    noise_figure_db: float = 6.0
    pscch_boost_db: float = 3.0
    carrier_ghz: float = 5.9
    pathloss: Optional[PathlossParams] = None
    nakagami_m_near: float = 3.0
    nakagami_m_far: float = 1.0
    nakagami_crossover_m: float = 100.0
    # Attenuation of leaked power into a victim slot, per VRB-pair offset
    # (offset 1 first). Approximates the standard in-band emission figures
    # for 20-PRB allocations; offsets past the list reuse the last entry.
    inband_emission_mask_db: tuple[float, ...] = (20.0, 26.0, 30.0, 33.0)
    sinr_threshold_pssch_db: float = 3.0
    sinr_threshold_pscch_db: float = 0.0
    max_range_m: float = 1500.0
    noise_psd_override_mw: Optional[float] = None

    def __post_init__(self):
        if self.pathloss is None:
            object.__setattr__(self, "pathloss", PathlossParams.for_carrier(self.carrier_ghz))
        if min(self.nakagami_m_near, self.nakagami_m_far) < 0.5:
            raise ValueError("Nakagami shape parameters must be >= 0.5")
        if any(a < 0 for a in self.inband_emission_mask_db):
            raise ValueError("emission mask attenuations must be >= 0 dB")

    @property
    def tx_power_mw(self) -> float:
        return db_to_linear(self.tx_power_dbm)

    @property
    def pscch_boost_linear(self) -> float:
        return db_to_linear(self.pscch_boost_db)

    @property
    def data_psd_mw(self) -> float:
        """Per-PRB transmit density of the data PRBs.

        The control PRBs carry ``boost`` times the data density and the total
        slot power equals tx_power: p * (DATA_PRBS + boost * SCI_PRBS) = P.
        """
        return self.tx_power_mw / (DATA_PRBS + self.pscch_boost_linear * SCI_PRBS)

    @property
    def noise_psd_mw(self) -> float:
        """Noise density per PRB, receiver noise figure included."""
        if self.noise_psd_override_mw is not None:
            return self.noise_psd_override_mw
        dbm = THERMAL_NOISE_DBM_PER_HZ + 10.0 * math.log10(PRB_BANDWIDTH_HZ) + self.noise_figure_db
        return db_to_linear(dbm)

    @property
    def threshold_pssch_linear(self) -> float:
        return db_to_linear(self.sinr_threshold_pssch_db)

    @property
    def threshold_pscch_linear(self) -> float:
        return db_to_linear(self.sinr_threshold_pscch_db)

    def emission_attenuation_linear(self, offset: int) -> float:
        """Linear power factor applied to an interferer ``offset`` pairs away."""
        if offset == 0:
            return 1.0
        mask = self.inband_emission_mask_db
        att_db = mask[min(offset, len(mask)) - 1]
        return db_to_linear(-att_db)

    def nakagami_m(self, distance_m):
        d = np.asarray(distance_m, dtype=float)
        out = np.where(d < self.nakagami_crossover_m, self.nakagami_m_near, self.nakagami_m_far)
        return out if out.ndim else float(out)


def nakagami_power_fading(m, rng: np.random.Generator, size=None):
    """Unit-mean power fading draws for Nakagami-m amplitude fading.

    The squared envelope of a Nakagami-m variable is Gamma(m, 1/m); m = 1
    reduces to Rayleigh fading (exponential power).
    """
    m = np.asarray(m, dtype=float)
    if np.any(m < 0.5):
        raise ValueError("Nakagami m must be >= 0.5")
    return rng.standard_gamma(m, size=size) / m


def received_power(distance_m: float, fading_draw: float, cfg: ChannelConfig) -> float:
    """Linear received power (mW) of the whole slot at ``distance_m``."""
    if distance_m <= 0:
        raise ValueError(f"distance must be > 0, got {distance_m}")
    return cfg.tx_power_mw * fading_draw / db_to_linear(cfg.pathloss.loss_db(distance_m))


@dataclass(frozen=True)
class AttemptReception:
    """Post-MRC SINRs of one transmission attempt at one receiver."""

    sinr_pssch_linear: float
    sinr_pscch_linear: float
    receivable: bool = True

    @classmethod
    def missed(cls) -> "AttemptReception":
        """Attempt the receiver could not listen to (half-duplex)."""
        return cls(0.0, 0.0, receivable=False)


def attempt_sinr(
    signal_per_antenna: Sequence[float],
    interferers: Sequence[tuple[Sequence[float], int]],
    cfg: ChannelConfig,
    receivable: bool = True,
) -> AttemptReception:
    """SINR of one attempt from per-antenna signal and interferer powers.

    ``interferers`` holds (per-antenna power pair, VRB-pair offset) entries;
    offset 0 means a co-slot transmission, larger offsets are attenuated by
    the emission mask. MRC sums the per-antenna SINRs; the control channel
    sees the same interference with the boosted signal density.
    """
    if not receivable:
        return AttemptReception.missed()
    noise = cfg.noise_psd_mw
    boost = cfg.pscch_boost_linear
    sinr_data = 0.0
    sinr_sci = 0.0
    for a, s in enumerate(signal_per_antenna):
        if s < 0:
            raise ValueError("signal power must be >= 0")
        denom = noise
        for powers, offset in interferers:
            denom += powers[a] * cfg.emission_attenuation_linear(offset)
        sinr_data += s / denom
        sinr_sci += s * boost / denom
    return AttemptReception(sinr_data, sinr_sci, receivable=True)


def harq_combine(
    first: AttemptReception,
    second: Optional[AttemptReception],
    cfg: ChannelConfig,
) -> bool:
    """Decode decision over one or two attempts of the same message.

    Decoded when any of {first, second, chase-combined} passes both the
    control and the data threshold; combining adds the linear SINRs per
    channel and a missed attempt contributes zero.
    """
    thr_d = cfg.threshold_pssch_linear
    thr_s = cfg.threshold_pscch_linear

    def passes(data: float, sci: float) -> bool:
        return data >= thr_d and sci >= thr_s

    if passes(first.sinr_pssch_linear, first.sinr_pscch_linear):
        return True
    if second is None:
        return False
    if passes(second.sinr_pssch_linear, second.sinr_pscch_linear):
        return True
    return passes(
        first.sinr_pssch_linear + second.sinr_pssch_linear,
        first.sinr_pscch_linear + second.sinr_pscch_linear,
    )
