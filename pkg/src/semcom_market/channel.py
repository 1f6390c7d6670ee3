"""Physical-layer math for the OFDMA downlink.

Each user owns an orthogonal resource block, so per-user capacity is the
single-link Shannon formula with distance-dependent path loss.  Freshness of
a delivered semantic payload is the payload size divided by the achieved
transmission rate (per-packet age).

All operations here are pure functions; linear units (watts, Hz, bits) are
used throughout, with dBm/dB conversion helpers for configs that quote
decibel figures.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Decimal megabyte, the telecom convention: 10 MB source = 8e7 bits.
BITS_PER_MEGABYTE = 8_000_000.0


class NoServiceError(ValueError):
    """Raised when a payload is evaluated against a zero transmission rate."""


def dbm_to_watts(x_dbm: float) -> float:
    """Convert a dBm power figure to watts."""
    return 10.0 ** (x_dbm / 10.0) / 1000.0


def db_to_linear(x_db: float) -> float:
    """Convert a dB ratio to a linear ratio."""
    return 10.0 ** (x_db / 10.0)


@dataclass(frozen=True)
class LinkParams:
    """Downlink channel parameters for one user.

    tx_power_w     transmit power of the provider, watts
    noise_power_w  average noise power, watts
    unit_gain      unit channel power gain, linear
    distance_m     provider-to-user distance, metres
    path_loss_exp  path-loss exponent (>= 1)
    """

    tx_power_w: float
    noise_power_w: float
    unit_gain: float
    distance_m: float
    path_loss_exp: float

    def __post_init__(self):
        for name in ("tx_power_w", "noise_power_w", "unit_gain", "distance_m", "path_loss_exp"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"LinkParams.{name} must be strictly positive")
        if self.path_loss_exp < 1.0:
            raise ValueError("LinkParams.path_loss_exp must be >= 1")

    @property
    def snr(self) -> float:
        """Received signal-to-noise ratio, linear."""
        return (
            self.unit_gain
            * self.distance_m ** -self.path_loss_exp
            * self.tx_power_w
            / self.noise_power_w
        )


@dataclass(frozen=True)
class SemanticPayload:
    """Semantic information to deliver: source size and extraction ratio.

    The transmitted volume is compression_rate * source_bits.
    """

    source_bits: float
    compression_rate: float

    def __post_init__(self):
        if not self.source_bits > 0.0:
            raise ValueError("SemanticPayload.source_bits must be positive")
        if not 0.0 < self.compression_rate <= 1.0:
            raise ValueError("SemanticPayload.compression_rate must be in (0, 1]")

    @property
    def payload_bits(self) -> float:
        return self.compression_rate * self.source_bits

    @property
    def payload_mbit(self) -> float:
        return self.payload_bits / 1e6


def channel_capacity(link: LinkParams) -> float:
    """Spectral efficiency of the downlink, bit/s/Hz.

    log1p keeps the value strictly positive even for SNR below float
    resolution of 1 + SNR.
    """
    return math.log1p(link.snr) / math.log(2.0)


def transmission_rate(bandwidth_hz: float, capacity: float) -> float:
    """Transmission rate for an allocated bandwidth, bit/s.

    Also valid in scaled units: MHz * (bit/s/Hz) gives Mbit/s.
    """
    if bandwidth_hz < 0.0:
        raise ValueError("bandwidth must be non-negative")
    return bandwidth_hz * capacity


def aosi(payload: SemanticPayload, rate_bps: float) -> float:
    """Age of the delivered semantic information, seconds.

    Per-packet age: payload bits divided by the transmission rate.  A zero
    rate means the user received no bandwidth and there is no service.
    """
    if rate_bps <= 0.0:
        raise NoServiceError("zero transmission rate: user received no bandwidth")
    return payload.payload_bits / rate_bps
