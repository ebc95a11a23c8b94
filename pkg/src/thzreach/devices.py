"""Antenna arrays, link SNR, capacity, and operating-mode selection.

An array of subarrays (m x n groups of p x q elements) can beamform (BF),
spatially multiplex (SM), or split into beamformed groups (HYBRID). Array
gain is idealised as 10*log10(element count driven per stream); an explicit
gain figure can override the BF value when a datasheet number is wanted.

Beamforming aims at the strongest path; remaining paths enter the candidate
evaluation with 0 dBi. Spatial streams map one-to-one onto the strongest
distinct paths and share transmit power equally.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Sequence

from .channel import OutageError, PathGain


class ArrayMode(str, Enum):
    OMNI = "OMNI"
    BF = "BF"
    SM = "SM"
    HYBRID = "HYBRID"


@dataclass(frozen=True)
class ArrayConfig:
    """Planar array layout: m x n subarrays, each p x q elements."""

    subarrays_m: int = 1
    subarrays_n: int = 1
    elements_p: int = 1
    elements_q: int = 1
    mode: ArrayMode = ArrayMode.OMNI
    sm_streams: int = 1
    explicit_gain_dbi: Optional[float] = None

    def __post_init__(self) -> None:
        for name in ("subarrays_m", "subarrays_n", "elements_p", "elements_q"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.mode in (ArrayMode.SM, ArrayMode.HYBRID):
            if self.sm_streams < 1:
                raise ValueError("sm_streams must be >= 1 for SM or HYBRID operation")
            if self.sm_streams > self.subarrays_m * self.subarrays_n:
                raise ValueError("sm_streams cannot exceed the subarray count")

    @property
    def total_elements(self) -> int:
        return self.subarrays_m * self.subarrays_n * self.elements_p * self.elements_q


OMNI_ARRAY = ArrayConfig()


def array_gain_dbi(config: ArrayConfig) -> float:
    """Directivity credited to the array in its configured mode."""
    if config.mode == ArrayMode.OMNI:
        return 0.0
    if config.mode == ArrayMode.BF:
        if config.explicit_gain_dbi is not None:
            return float(config.explicit_gain_dbi)
        return 10.0 * math.log10(config.total_elements)
    # SM and HYBRID drive total/sm_streams elements per stream.
    return 10.0 * math.log10(config.total_elements / config.sm_streams)


@dataclass(frozen=True)
class RadioConfig:
    """Link radio parameters; bandwidth defaults to 10% of the carrier."""

    center_frequency_hz: float
    tx_power_dbm: float = 10.0
    noise_psd_dbm_hz: float = -160.0
    bandwidth_hz: Optional[float] = None
    tx_array: ArrayConfig = field(default_factory=ArrayConfig)
    rx_array: ArrayConfig = field(default_factory=ArrayConfig)

    def __post_init__(self) -> None:
        if self.center_frequency_hz <= 0.0:
            raise ValueError("center frequency must be positive")
        if self.bandwidth_hz is None:
            object.__setattr__(self, "bandwidth_hz", 0.1 * self.center_frequency_hz)
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth must be positive")


def noise_floor_dbm(radio: RadioConfig) -> float:
    return radio.noise_psd_dbm_hz + 10.0 * math.log10(radio.bandwidth_hz)


def snr_db(radio: RadioConfig, aggregate_gain_db: float) -> float:
    """Link SNR: transmit power, both array gains, channel gain, noise floor."""
    return (
        radio.tx_power_dbm
        + array_gain_dbi(radio.tx_array)
        + array_gain_dbi(radio.rx_array)
        + aggregate_gain_db
        - noise_floor_dbm(radio)
    )


def capacity_bps(radio: RadioConfig, snr_db_value: float) -> float:
    """Shannon capacity for the configured mode.

    BF and OMNI use the full band at the given SNR. SM and HYBRID split
    transmit power over the configured stream count (the per-stream array
    gain is already part of snr_db via array_gain_dbi) and sum the streams.
    """
    if snr_db_value is None or snr_db_value == -math.inf:
        raise OutageError("no SNR available: link is in outage")
    b = radio.bandwidth_hz
    mode = radio.tx_array.mode
    if mode in (ArrayMode.SM, ArrayMode.HYBRID):
        k = radio.tx_array.sm_streams
        per_stream = snr_db_value - 10.0 * math.log10(k)
        return k * b * math.log2(1.0 + 10.0 ** (per_stream / 10.0))
    return b * math.log2(1.0 + 10.0 ** (snr_db_value / 10.0))


@dataclass(frozen=True)
class LinkResult:
    """One evaluated technique/frequency/receiver combination."""

    rx_id: int
    frequency_hz: float
    technique: str
    nominal_distance_m: float
    los: bool
    n_paths: int
    aggregate_gain_db: Optional[float]
    snr_db: Optional[float]
    capacity_bps: Optional[float]
    in_outage: bool


def select_mode(radio: RadioConfig, paths: Sequence[PathGain]) -> ArrayMode:
    """Pick BF, SM, or HYBRID by evaluated capacity on the given path set.

    BF beamforms at the strongest path; the remaining paths still reach the
    receiver with 0 dBi and join the power sum. SM uses the configured
    stream count; HYBRID searches stream counts 1..sm_streams. Capacity ties
    break toward fewer streams, then BF before SM before HYBRID.
    """
    if not paths:
        raise OutageError("no propagation path: link is in outage")
    gains = sorted((p.total_gain_db for p in paths), reverse=True)
    cfg = radio.tx_array
    sm_limit = max(1, cfg.sm_streams)
    b = radio.bandwidth_hz
    noise = radio.noise_psd_dbm_hz + 10.0 * math.log10(b)
    full_gain = (
        float(cfg.explicit_gain_dbi)
        if cfg.explicit_gain_dbi is not None
        else 10.0 * math.log10(cfg.total_elements)
    )
    rx_cfg = radio.rx_array
    rx_full = (
        float(rx_cfg.explicit_gain_dbi)
        if rx_cfg.explicit_gain_dbi is not None
        else 10.0 * math.log10(rx_cfg.total_elements)
    )

    def stream_capacity(s: int) -> float:
        """Capacity with s streams, each on one of the s strongest paths."""
        tx_g = 10.0 * math.log10(cfg.total_elements / s)
        rx_g = 10.0 * math.log10(rx_cfg.total_elements / s)
        split = 10.0 * math.log10(s)
        cap = 0.0
        for i in range(s):
            snr = radio.tx_power_dbm - split + tx_g + rx_g + gains[i] - noise
            cap += b * math.log2(1.0 + 10.0 ** (snr / 10.0))
        return cap

    # BF: strongest path beamformed, the rest arrive omni.
    power = 10.0 ** ((gains[0] + full_gain + rx_full) / 10.0)
    for g in gains[1:]:
        power += 10.0 ** (g / 10.0)
    snr_bf = radio.tx_power_dbm + 10.0 * math.log10(power) - noise
    cap_bf = b * math.log2(1.0 + 10.0 ** (snr_bf / 10.0))

    usable = min(sm_limit, len(gains))
    cap_sm = stream_capacity(usable)
    best_hybrid = stream_capacity(1)
    hybrid_streams = 1
    for s in range(2, usable + 1):
        c = stream_capacity(s)
        # strict margin keeps equal-capacity ties at the lower stream count
        if c > best_hybrid + 1e-12 * max(1.0, abs(best_hybrid)):
            best_hybrid = c
            hybrid_streams = s

    candidates = [
        (cap_bf, 1, 0, ArrayMode.BF),
        (cap_sm, usable, 1, ArrayMode.SM),
        (best_hybrid, hybrid_streams, 2, ArrayMode.HYBRID),
    ]
    # Highest capacity wins; near-ties prefer fewer streams, then BF < SM < HYBRID.
    best_cap = max(c[0] for c in candidates)
    tol = 1e-9 * max(1.0, abs(best_cap))
    viable = [c for c in candidates if c[0] >= best_cap - tol]
    viable.sort(key=lambda c: (c[1], c[2]))
    return viable[0][3]
