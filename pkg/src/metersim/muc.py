"""Multi-utility communication concentrator.

Sits between the radio channel and the back office: decodes delivered
frames, drops repeater duplicates, attaches OBIS codes, and pushes one
newline-terminated structured-text line per message to its sinks. A sink
is any callable taking the rendered line; the in-process list sink and a
TCP push client are provided.

Uplink line protocol, fixed key order, one object per line:

    {"kind":"reading","muc":"MUC-1","meter":{"mfr":"ABC","id":12345678,
     "medium":"electricity"},"obis":"1-0:1.8.0","value":12345,"scale":0,
     "unit":"Wh","t":3600.000}
    {"kind":"raw","muc":"MUC-1","hex":"0B00...","t":3600.000}
"""

import socket
from dataclasses import dataclass

from . import obis
from .codec import (
    CodecError,
    Control,
    MeterAddress,
    Telegram,
    decode_telegram,
    medium_name,
)
from .channel import run_sim
from .obis import ObisReading, UnmappedPair
from .traffic import PROVIDER_WINDOW_H, expand_addresses


class HorizonTooShort(ValueError):
    pass


@dataclass(frozen=True)
class Accepted:
    telegram: Telegram
    readings: tuple[ObisReading, ...]


@dataclass(frozen=True)
class Duplicate:
    address: MeterAddress
    access_number: int


@dataclass(frozen=True)
class Rejected:
    error: CodecError


def translate_telegram(telegram: Telegram, t_s: float) -> tuple[list[ObisReading], int]:
    """OBIS readings for every mappable record, plus the skipped count."""
    readings = []
    skipped = 0
    for rec in telegram.records:
        try:
            code = obis.map_to_obis(telegram.address.device_type, rec.quantity)
        except UnmappedPair:
            skipped += 1
            continue
        readings.append(
            ObisReading(code, rec.value, rec.scale_exp, rec.unit, telegram.address, t_s)
        )
    return readings, skipped


def render_reading(muc_id: str, reading: ObisReading) -> str:
    a = reading.meter
    return (
        f'{{"kind":"reading","muc":"{muc_id}",'
        f'"meter":{{"mfr":"{a.manufacturer}","id":{a.ident},'
        f'"medium":"{medium_name(a.device_type)}"}},'
        f'"obis":"{obis.format_obis(reading.code)}",'
        f'"value":{reading.value},"scale":{reading.scale_exp},'
        f'"unit":"{reading.unit.value}","t":{reading.timestamp_s:.3f}}}'
    )


def render_raw(muc_id: str, frame: bytes, t_s: float) -> str:
    return f'{{"kind":"raw","muc":"{muc_id}","hex":"{frame.hex().upper()}","t":{t_s:.3f}}}'


def to_wire(line: str) -> bytes:
    return (line + "\n").encode("utf-8")


class Muc:
    """Stateful concentrator: one instance per run, mutated by one thread."""

    def __init__(self, muc_id: str = "MUC-1", dedup: bool = True,
                 raw_channel: bool = False, default_dedup_window_s: float = 3600.0):
        self.muc_id = muc_id
        self.dedup = dedup
        self.raw_channel = raw_channel
        self.default_dedup_window_s = default_dedup_window_s
        self.dedup_windows: dict[MeterAddress, float] = {}
        # address -> {access_number: last time seen}; pruned to the window
        self.seen: dict[MeterAddress, dict[int, float]] = {}
        self.last_seen: dict[MeterAddress, float] = {}
        self.readings: list[ObisReading] = []
        self.sinks: list = []
        self.accepted = 0
        self.duplicates = 0
        self.rejected = 0
        self.records_skipped = 0
        self.readings_emitted = 0

    def set_dedup_window(self, address: MeterAddress, window_s: float) -> None:
        self.dedup_windows[address] = window_s

    def _emit(self, line: str) -> None:
        for sink in self.sinks:
            sink(line)

    def ingest(self, frame: bytes, t_s: float):
        """Decode one delivered frame; returns Accepted, Duplicate or Rejected."""
        try:
            telegram = decode_telegram(frame)
        except CodecError as err:
            self.rejected += 1
            return Rejected(err)
        addr = telegram.address
        window = self.dedup_windows.get(addr, self.default_dedup_window_s)
        history = self.seen.setdefault(addr, {})
        for acc in [a for a, seen_t in history.items() if t_s - seen_t > window]:
            del history[acc]
        if self.dedup and telegram.access_number in history:
            self.duplicates += 1
            return Duplicate(addr, telegram.access_number)
        history[telegram.access_number] = t_s
        self.last_seen[addr] = t_s
        self.accepted += 1
        readings: tuple[ObisReading, ...] = ()
        if telegram.control is Control.DATA_UNSOLICITED:
            got, skipped = translate_telegram(telegram, t_s)
            self.records_skipped += skipped
            readings = tuple(got)
            for reading in readings:
                self.readings.append(reading)
                self._emit(render_reading(self.muc_id, reading))
                self.readings_emitted += 1
        if self.raw_channel:
            self._emit(render_raw(self.muc_id, frame, t_s))
        return Accepted(telegram, readings)

    def translate(self, telegram: Telegram, t_s: float) -> list[ObisReading]:
        readings, skipped = translate_telegram(telegram, t_s)
        self.records_skipped += skipped
        return readings

    def emit_reading(self, reading: ObisReading) -> str:
        line = render_reading(self.muc_id, reading)
        self._emit(line)
        return line

    def emit_raw(self, frame: bytes, t_s: float) -> str:
        line = render_raw(self.muc_id, frame, t_s)
        self._emit(line)
        return line

    def visualisation_outage(self, address: MeterAddress, window_h: float,
                             horizon_s: float) -> float:
        """Fraction of consecutive windows without any reading for a meter."""
        window_s = window_h * 3600.0
        n_windows = int(horizon_s // window_s)
        if n_windows < 2:
            raise HorizonTooShort(
                f"horizon {horizon_s}s covers {n_windows} window(s) of {window_h}h"
            )
        hit = [False] * n_windows
        for reading in self.readings:
            if reading.meter == address and reading.timestamp_s < n_windows * window_s:
                hit[int(reading.timestamp_s // window_s)] = True
        return hit.count(False) / n_windows


class ListSink:
    def __init__(self):
        self.lines: list[str] = []

    def __call__(self, line: str) -> None:
        self.lines.append(line)


class TcpEmitter:
    """Push client for the uplink channel: connects and streams lines."""

    def __init__(self, host: str, port: int, timeout_s: float = 5.0):
        self.sock = socket.create_connection((host, port), timeout=timeout_s)

    def __call__(self, line: str) -> None:
        self.sock.sendall(to_wire(line))

    def close(self) -> None:
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def simulate_scenario(scenario, seed=None, extra_sinks=(), event_log=None):
    """Run a scenario with a concentrator wired to the channel.

    Returns (SimMetrics, Muc, ListSink). Each delivered telegram is passed
    through ingest; readings land on the in-process sink plus any extras.
    """
    muc = Muc(muc_id=scenario.muc.muc_id, dedup=scenario.muc.dedup,
              raw_channel=scenario.muc.raw)
    addresses = expand_addresses(scenario.meters)
    i = 0
    for cfg in scenario.meters:
        for _ in range(cfg.count):
            muc.set_dedup_window(addresses[i], 2.0 * cfg.interval_s)
            i += 1
    sink = ListSink()
    muc.sinks.append(sink)
    muc.sinks.extend(extra_sinks)
    metrics = run_sim(scenario, seed=seed,
                      deliver=lambda _idx, frame, t: muc.ingest(frame, t),
                      event_log=event_log)
    return metrics, muc, sink


def max_visualisation_outage(scenario, muc: Muc) -> float | None:
    """Worst provider-window outage over meters whose window fits the run.

    Meters without a provider window, or whose window does not fit at least
    twice in the horizon, are skipped; None when nothing is measurable.
    """
    addresses = expand_addresses(scenario.meters)
    worst = None
    i = 0
    for cfg in scenario.meters:
        window_h = PROVIDER_WINDOW_H[cfg.kind]
        for _ in range(cfg.count):
            addr = addresses[i]
            i += 1
            if window_h is None:
                continue
            try:
                outage = muc.visualisation_outage(addr, window_h, scenario.duration_s)
            except HorizonTooShort:
                continue
            worst = outage if worst is None else max(worst, outage)
    return worst
