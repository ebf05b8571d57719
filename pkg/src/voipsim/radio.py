"""PHY profiles for 802.11a/b, frame airtime, two-ray path loss and reception."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

SPEED_OF_LIGHT = 299_792_458.0
NOISE_FLOOR_DBM = -101.0

MBPS = 1_000_000


@dataclass(frozen=True)
class PhyProfile:
    """Timing and rate constants of one PHY. All durations in microseconds."""

    standard: str
    rates: tuple[int, ...]
    slot_time: int
    sifs: int
    preamble_plus_plcp: int
    cw_min: int
    cw_max: int
    rx_sensitivity: dict[int, float] = field(hash=False)
    control_rate: int
    ofdm: bool

    @property
    def difs(self) -> int:
        return self.sifs + 2 * self.slot_time

    @property
    def max_rate(self) -> int:
        return max(self.rates)

    def with_overrides(self, **kw) -> "PhyProfile":
        return replace(self, **kw)


# Representative sensitivities. B: vendor data-sheet figures; A: the minimum
# figures from the 802.11a rate table. Both must be strictly increasing in rate.
PHY_B = PhyProfile(
    standard="B",
    rates=(1 * MBPS, 2 * MBPS, 5_500_000, 11 * MBPS),
    slot_time=20,
    sifs=10,
    preamble_plus_plcp=192,
    cw_min=31,
    cw_max=1023,
    rx_sensitivity={1 * MBPS: -94.0, 2 * MBPS: -91.0, 5_500_000: -87.0, 11 * MBPS: -82.0},
    control_rate=2 * MBPS,
    ofdm=False,
)

PHY_A = PhyProfile(
    standard="A",
    rates=tuple(r * MBPS for r in (6, 9, 12, 18, 24, 36, 48, 54)),
    slot_time=9,
    sifs=16,
    preamble_plus_plcp=20,
    cw_min=15,
    cw_max=1023,
    rx_sensitivity={
        6 * MBPS: -82.0, 9 * MBPS: -81.0, 12 * MBPS: -79.0, 18 * MBPS: -77.0,
        24 * MBPS: -74.0, 36 * MBPS: -70.0, 48 * MBPS: -66.0, 54 * MBPS: -65.0,
    },
    control_rate=24 * MBPS,
    ofdm=True,
)

PROFILES = {"A": PHY_A, "B": PHY_B}

# OFDM framing: 16 SERVICE bits + 6 tail bits, 4 us symbols.
_OFDM_SERVICE_TAIL_BITS = 22
_OFDM_SYMBOL_US = 4

ACK_FRAME_BYTES = 14


def profile(standard: str) -> PhyProfile:
    try:
        return PROFILES[standard.upper()]
    except KeyError:
        raise ValueError(f"unknown PHY standard {standard!r}; expected 'A' or 'B'") from None


def _check_rate(rate: int, phy: PhyProfile) -> None:
    if rate not in phy.rx_sensitivity:
        raise ValueError(f"rate {rate} b/s is not a {phy.standard} profile rate")


def transmit_duration(frame_bytes: int, rate: int, phy: PhyProfile) -> int:
    """Airtime in microseconds of a frame of ``frame_bytes`` (MAC header included)."""
    if frame_bytes <= 0:
        raise ValueError("frame_bytes must be positive")
    _check_rate(rate, phy)
    bits = 8 * frame_bytes
    if phy.ofdm:
        bits_per_symbol = rate * _OFDM_SYMBOL_US // MBPS
        symbols = -(-(bits + _OFDM_SERVICE_TAIL_BITS) // bits_per_symbol)
        return phy.preamble_plus_plcp + symbols * _OFDM_SYMBOL_US
    return phy.preamble_plus_plcp + -(-bits * MBPS // rate)


def ack_duration(phy: PhyProfile) -> int:
    return transmit_duration(ACK_FRAME_BYTES, phy.control_rate, phy)


def crossover_distance(f_hz: float, ht: float, hr: float) -> float:
    wavelength = SPEED_OF_LIGHT / f_hz
    return 4.0 * math.pi * ht * hr / wavelength


def path_loss_db(d: float, f_hz: float, ht: float, hr: float) -> float:
    """Two-ray ground path loss: free space inside the crossover, d^4 beyond it."""
    if d <= 0 or f_hz <= 0 or ht <= 0 or hr <= 0:
        raise ValueError(f"path loss needs positive inputs, got d={d} f={f_hz} ht={ht} hr={hr}")
    wavelength = SPEED_OF_LIGHT / f_hz
    if d < 4.0 * math.pi * ht * hr / wavelength:
        return 20.0 * math.log10(4.0 * math.pi * d / wavelength)
    return 40.0 * math.log10(d) - 20.0 * math.log10(ht * hr)


@dataclass(frozen=True)
class RadioConfig:
    tx_power_dbm: float = 39.0
    antenna_gain_db: float = 15.0
    antenna_height_m: float = 1.5


def received_power_dbm(tx: RadioConfig, loss_db: float, rx_gain_db: float | None = None) -> float:
    rx_gain = tx.antenna_gain_db if rx_gain_db is None else rx_gain_db
    return tx.tx_power_dbm + tx.antenna_gain_db + rx_gain - loss_db


def can_decode(tx: RadioConfig, loss_db: float, rate: int, phy: PhyProfile,
               rx_gain_db: float | None = None) -> bool:
    _check_rate(rate, phy)
    return received_power_dbm(tx, loss_db, rx_gain_db) >= phy.rx_sensitivity[rate]


def best_rate(rx_power_dbm: float, phy: PhyProfile) -> int | None:
    """Highest rate whose sensitivity is met, or None when out of range."""
    best = None
    for rate in phy.rates:
        if rx_power_dbm >= phy.rx_sensitivity[rate] and (best is None or rate > best):
            best = rate
    return best


@dataclass(frozen=True)
class Channel:
    index: int
    frequency_hz: float


def parse_mask(mask: str) -> frozenset[int]:
    """'0100' -> {1}: character i (from the left) is channel i."""
    if not mask or any(c not in "01" for c in mask):
        raise ValueError(f"bad channel mask {mask!r}")
    return frozenset(i for i, c in enumerate(mask) if c == "1")


def format_mask(channels, width: int = 4) -> str:
    width = max(width, max(channels, default=-1) + 1)
    return "".join("1" if i in channels else "0" for i in range(width))
