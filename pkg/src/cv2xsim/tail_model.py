"""Analytical model of the IPG tail under persistent-interference losses.

The transmitter and its dominant interferer(s) each follow a geometric-like
resource reselection process. Conditioned on a message loss, the gap length T
(in transmission opportunities) survives opportunity k only if neither an
interferer reselection nor a lucky transmitter reselection ends the collision
at k. The per-opportunity reselection probability is non-uniform: zero while
the counter cannot have expired, then decaying toward the long-run rate.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


@dataclass(frozen=True)
class ReselectionParams:
    """Counter range [rho, sigma] and reselection probability on expiry."""

    rho: int
    sigma: int
    p: float

    def __post_init__(self):
        if self.rho < 1:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        if self.sigma < self.rho:
            raise ValueError(f"sigma ({self.sigma}) must be >= rho ({self.rho})")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {self.p}")

    def expected_interval(self) -> float:
        """Mean opportunities between reselections: (rho + (sigma-rho)/2) / p."""
        return (self.rho + (self.sigma - self.rho) / 2.0) / self.p


@dataclass(frozen=True)
class TailModelConfig:
    """Inputs for the tail curve: reselection processes, the probability p_f
    that a transmitter reselection lands on clean resources, the interferer
    count mode, and the horizon."""

    sps: ReselectionParams
    oneshot: Optional[ReselectionParams]
    p_f: float
    interferer_mode: str = "single"
    k_max: int = 60

    def __post_init__(self):
        if not 0.0 <= self.p_f <= 1.0:
            raise ValueError(f"p_f must be in [0, 1], got {self.p_f}")
        if self.interferer_mode not in ("single", "double"):
            raise ValueError(f"interferer_mode must be 'single' or 'double', got {self.interferer_mode!r}")
        if self.k_max < 1:
            raise ValueError(f"k_max must be >= 1, got {self.k_max}")


@dataclass
class TailCurve:
    """Survival values P(T > k) for k = 0..k_max; values[0] == 1."""

    values: np.ndarray

    @property
    def k_max(self) -> int:
        return len(self.values) - 1

    def slope(self, k_lo: float, k_hi: float) -> float:
        """Log10-domain least-squares slope per opportunity over [k_lo, k_hi]."""
        ks = np.arange(len(self.values))
        sel = (ks >= k_lo) & (ks <= k_hi) & (self.values > 0)
        if sel.sum() < 3:
            raise ValueError(
                f"need >= 3 positive tail points in [{k_lo}, {k_hi}], got {int(sel.sum())}"
            )
        return float(np.polyfit(ks[sel], np.log10(self.values[sel]), 1)[0])


def q_k(k: int, params: ReselectionParams) -> float:
    """Reselection probability at opportunity k.

    Zero for k <= rho (the counter cannot have expired yet); afterwards set so
    the expected number of reselections over k opportunities approaches
    k / expected_interval, clamped into [0, 1].
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if k <= params.rho:
        return 0.0
    q = 2.0 * k * params.p / ((params.sigma + params.rho) * (k - params.rho))
    return min(1.0, q)


def q_i(k: int, sps: ReselectionParams, oneshot: Optional[ReselectionParams]) -> float:
    """Combined reselection probability of the interleaved processes.

    Union of the independent per-opportunity events: q_s + q_o - q_s*q_o.
    """
    q_s = q_k(k, sps)
    q_o = q_k(k, oneshot) if oneshot is not None else 0.0
    return q_o * (1.0 - q_s) + q_s * (1.0 - q_o) + q_s * q_o


def p_u(k: int, cfg: TailModelConfig) -> float:
    """Probability the collision ends (successful transmission) at opportunity k."""
    q = q_i(k, cfg.sps, cfg.oneshot)
    p_r = q * cfg.p_f
    if cfg.interferer_mode == "single":
        p_a = 1.0 - (1.0 - q) ** 2
        p_d = 1.0 - q
        p_n = (1.0 - q) ** 2
    else:
        # Two dominant interferers per attempt: an attempt only clears when
        # both of its interferers reselect.
        p_a = 1.0 - (1.0 - q * q) ** 2
        p_d = 1.0 - q
        p_n = (1.0 - q * q) ** 2
    return p_a * p_d + p_n * p_r + p_a * p_r


def tail(cfg: TailModelConfig) -> TailCurve:
    """Survival curve P(T > k) = prod_{i=1..k} (1 - p_u(i)), P(T > 0) = 1."""
    values = np.ones(cfg.k_max + 1)
    acc = 1.0
    for k in range(1, cfg.k_max + 1):
        acc *= 1.0 - p_u(k, cfg)
        values[k] = acc
    return TailCurve(values)


def oracle_tail(cfg: TailModelConfig, trials: int, rng: np.random.Generator) -> TailCurve:
    """Monte Carlo estimate of the survival curve from the raw event structure.

    Each trial runs the conditioned gap process: at every opportunity k the
    interferer processes (two in single mode, two per attempt in double mode)
    and the transmitter each reselect independently with probability q_i(k);
    a transmitter reselection succeeds with probability p_f. The opportunity
    ends the gap when interference clears while the transmitter stays, or the
    transmitter reselects successfully. Returns the empirical survival curve
    of the first-success time, censored at k_max.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    values = np.ones(cfg.k_max + 1)
    alive = np.ones(trials, dtype=bool)
    for k in range(1, cfg.k_max + 1):
        q = q_i(k, cfg.sps, cfg.oneshot)
        if cfg.interferer_mode == "single":
            cleared = (rng.random(trials) < q) | (rng.random(trials) < q)
        else:
            first = (rng.random(trials) < q) & (rng.random(trials) < q)
            second = (rng.random(trials) < q) & (rng.random(trials) < q)
            cleared = first | second
        tx_resel = rng.random(trials) < q
        lucky = rng.random(trials) < cfg.p_f
        success = (cleared & ~tx_resel) | (tx_resel & lucky)
        alive &= ~success
        values[k] = alive.sum() / trials
    return TailCurve(values)


@dataclass(frozen=True)
class SlopeComparison:
    slope_analytic: float
    slope_simulated: float
    relative_gap: float


def compare_slopes(
    analytic: TailCurve,
    simulated,
    fit_lo_ms: float,
    fit_hi_ms: float,
    period_ms: float = 100.0,
) -> SlopeComparison:
    """Compare log10 tail slopes per transmission opportunity.

    The analytical curve is fitted over k in [fit_lo_ms, fit_hi_ms] / period;
    the simulated CCDF over the same span in ms, rescaled to per-opportunity
    units. The constant offset between the curves cancels by construction.
    """
    from .metrics import tail_slope

    k_lo = fit_lo_ms / period_ms
    k_hi = fit_hi_ms / period_ms
    slope_a = analytic.slope(k_lo, k_hi)
    # tail_slope is per 100 ms; one opportunity spans period_ms.
    slope_s = tail_slope(simulated, fit_lo_ms, fit_hi_ms) * (period_ms / 100.0)
    if slope_s == 0.0:
        raise ValueError("simulated slope is zero; relative gap undefined")
    gap = abs(slope_a - slope_s) / abs(slope_s)
    return SlopeComparison(slope_a, slope_s, gap)


def oneshot_params(alpha: int, beta: int) -> ReselectionParams:
    """One-shot process: reselects with certainty when its counter expires."""
    return ReselectionParams(alpha, beta, 1.0)


def sps_params(alpha: int, beta: int, keep_probability: float) -> ReselectionParams:
    """Persistent-scheduling process: reselects with probability 1 - p_keep."""
    p = 1.0 - keep_probability
    if p <= 0.0:
        raise ValueError("keep_probability of 1 gives no reselections")
    return ReselectionParams(alpha, beta, p)
