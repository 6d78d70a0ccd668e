"""Meter populations and their transmission schedules.

Each metering medium ships with a default send interval and a provider-side
visualisation window (how stale a reading may get before the utility's view
counts as an outage):

    kind              send interval   provider window
    electricity       7.5 min         1 h
    gas               30 min          1 h
    district heating  30 min          1 h
    hot water         240 min         24 h
    repeater          240 min         -

Two arrival processes are supported per meter group: memoryless (Poisson)
inter-arrival times for analytic comparability, and periodic sends with
uniform dither, which is how the real devices behave.
"""

import enum
import random
from dataclasses import dataclass, field

from .codec import Coding, DataRecord, DeviceType, MeterAddress, Quantity


class MeterKind(enum.Enum):
    ELECTRICITY = "electricity"
    GAS = "gas"
    DISTRICT_HEATING = "district-heating"
    HOT_WATER = "hot-water"
    REPEATER = "repeater"


SEND_INTERVAL_MIN = {
    MeterKind.ELECTRICITY: 7.5,
    MeterKind.GAS: 30.0,
    MeterKind.DISTRICT_HEATING: 30.0,
    MeterKind.HOT_WATER: 240.0,
    MeterKind.REPEATER: 240.0,
}

# Hours of provider-side staleness tolerance; None means not applicable.
PROVIDER_WINDOW_H = {
    MeterKind.ELECTRICITY: 1.0,
    MeterKind.GAS: 1.0,
    MeterKind.DISTRICT_HEATING: 1.0,
    MeterKind.HOT_WATER: 24.0,
    MeterKind.REPEATER: None,
}

KIND_DEVICE_TYPE = {
    MeterKind.ELECTRICITY: DeviceType.ELECTRICITY,
    MeterKind.GAS: DeviceType.GAS,
    MeterKind.DISTRICT_HEATING: DeviceType.HEAT,
    MeterKind.HOT_WATER: DeviceType.HOT_WATER,
    MeterKind.REPEATER: DeviceType.REPEATER,
}


class Arrival(enum.Enum):
    POISSON = "poisson"
    PERIODIC_JITTER = "periodic-jitter"


class WmbusMode(enum.Enum):
    """Radio mode; S2/T2 are the bidirectional (acknowledged) variants."""

    S1 = "S1"
    T1 = "T1"
    S2 = "S2"
    T2 = "T2"

    @property
    def bidirectional(self) -> bool:
        return self in (WmbusMode.S2, WmbusMode.T2)


def default_records(kind: MeterKind) -> list[DataRecord]:
    if kind is MeterKind.ELECTRICITY:
        return [DataRecord(Coding.INT32, Quantity.ENERGY, 0, 12_345_678)]
    if kind is MeterKind.GAS:
        return [DataRecord(Coding.BCD8, Quantity.VOLUME, -3, 4_273_110)]
    if kind is MeterKind.DISTRICT_HEATING:
        return [DataRecord(Coding.INT32, Quantity.ENERGY, 0, 987_654)]
    if kind is MeterKind.HOT_WATER:
        return [DataRecord(Coding.INT32, Quantity.VOLUME, -3, 52_340)]
    return [DataRecord(Coding.INT16, Quantity.TEMPERATURE, -1, 215)]


@dataclass
class MeterConfig:
    kind: MeterKind
    count: int = 1
    interval_min: float | None = None  # None means "use the kind's default"
    arrival: Arrival = Arrival.PERIODIC_JITTER
    jitter: float = 0.1
    records: list[DataRecord] = field(default_factory=list)
    mode: WmbusMode = WmbusMode.T1

    def __post_init__(self):
        if self.interval_min is None:
            self.interval_min = SEND_INTERVAL_MIN[self.kind]
        if not self.records:
            self.records = default_records(self.kind)
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")
        if self.interval_min <= 0:
            raise ValueError(f"interval_min must be positive, got {self.interval_min}")
        if not 0.0 <= self.jitter <= 1.0:
            raise ValueError(f"jitter must be in [0, 1], got {self.jitter}")

    @property
    def interval_s(self) -> float:
        return self.interval_min * 60.0


def default_profile(kind: MeterKind) -> MeterConfig:
    """The stock transmission profile for a metering medium."""
    return MeterConfig(kind=kind)


@dataclass
class MeterState:
    """Mutable per-meter bookkeeping owned by the channel simulator."""

    address: MeterAddress
    next_tx_s: float = 0.0
    access_number: int = 0
    retries_left: int = 0


def next_transmission_time(
    config: MeterConfig, now_s: float, rng: random.Random
) -> float:
    """Draw the next send instant after now_s for a meter of this config."""
    interval = config.interval_s
    if config.arrival is Arrival.POISSON:
        delta = rng.expovariate(1.0 / interval)
    else:
        delta = interval * (1.0 + rng.uniform(-config.jitter, config.jitter))
    # strictly advancing even at jitter 1.0 or a degenerate exponential draw
    return now_s + max(delta, 1e-9)


def meter_rng(seed: int | str, meter_index: int) -> random.Random:
    """Independent deterministic substream for one meter.

    Seeding with a string hashes it through SHA-512, so streams are stable
    across platforms and independent of meter iteration order.
    """
    return random.Random(f"{seed}|meter{meter_index}")


def expand_addresses(configs: list[MeterConfig]) -> list[MeterAddress]:
    """Flatten meter groups into one address per physical meter.

    Addresses are synthetic but unique and deterministic: a shared
    manufacturer with sequential idents, device type taken from the kind.
    """
    addresses = []
    for cfg in configs:
        for _ in range(cfg.count):
            addresses.append(
                MeterAddress(
                    manufacturer="SIM",
                    ident=len(addresses) + 1,
                    version=1,
                    device_type=KIND_DEVICE_TYPE[cfg.kind],
                )
            )
    return addresses


def offered_load(scenario) -> float:
    """Expected fraction of channel time occupied by first transmissions."""
    airtime_s = scenario.channel.airtime_ms / 1000.0
    return sum(cfg.count * airtime_s / cfg.interval_s for cfg in scenario.meters)
