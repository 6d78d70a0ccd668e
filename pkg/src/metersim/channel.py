"""Discrete-event simulation of the shared meter radio channel.

One channel, fixed-length telegrams, three access policies:

* pure Aloha: transmit the instant a telegram is generated;
* slotted Aloha: delay the start to the next slot boundary;
* CSMA/CA: run a clear-channel assessment first and back off when busy.

The CCA result reflects the channel state one turnaround window (tau) in
the past, so a frame is invisible to other senders for its first tau and
still "visible" for tau after it ends. Any time overlap between frames
destroys all of them (no capture effect). Acknowledged modes retransmit
after a timeout with a uniform random backoff, up to a retry limit.

Closed-form throughput curves for all three policies live alongside the
simulator and act as its oracles: for memoryless (Poisson) traffic the
simulated throughput converges on them exactly.

A single run is strictly sequential and deterministic given (scenario,
seed): every random draw comes from per-meter substreams and events are
ordered by (time, meter index, sequence number). Independent runs share no
state and may execute in parallel.
"""

import enum
import heapq
import math
import statistics
from collections import deque
from dataclasses import dataclass, field

from .codec import Control, Telegram, encode_telegram
from .traffic import (
    MeterConfig,
    MeterKind,
    MeterState,
    Arrival,
    expand_addresses,
    meter_rng,
    next_transmission_time,
    offered_load,
)


class InvalidScenario(ValueError):
    pass


class Policy(enum.Enum):
    PURE_ALOHA = "pure-aloha"
    SLOTTED_ALOHA = "slotted-aloha"
    CSMA_CA = "csma-ca"


class DeferMode(enum.Enum):
    """What a CSMA sender does with a telegram after a busy assessment.

    RESENSE backs off by a uniform random delay and assesses again until
    the telegram finally goes out. ABANDON treats the generation stream as
    the aggregate of new and rescheduled traffic (the infinite-population
    idealization behind the closed-form curve): a busy assessment consumes
    the telegram, whose retry is already represented by a later arrival.
    """

    RESENSE = "resense"
    ABANDON = "abandon"


@dataclass
class AckParams:
    enabled: bool = False
    timeout_ms: float = 50.0
    max_retries: int = 3
    backoff_window_ms: float = 100.0
    ack_airtime_ms: float = 0.0

    def __post_init__(self):
        if self.timeout_ms < 0 or self.backoff_window_ms < 0 or self.ack_airtime_ms < 0:
            raise InvalidScenario("ack timing parameters must be non-negative")
        if self.max_retries < 0:
            raise InvalidScenario("max_retries must be non-negative")


@dataclass
class ChannelParams:
    airtime_ms: float = 10.0
    slot_ms: float | None = None
    cca_turnaround_ms: float = 1.0
    policy: Policy = Policy.PURE_ALOHA
    ack: AckParams = field(default_factory=AckParams)
    csma_defer: DeferMode = DeferMode.RESENSE

    def __post_init__(self):
        if self.airtime_ms <= 0:
            raise InvalidScenario(f"airtime_ms must be positive, got {self.airtime_ms}")
        if self.slot_ms is None:
            self.slot_ms = self.airtime_ms
        if self.slot_ms <= 0:
            raise InvalidScenario(f"slot_ms must be positive, got {self.slot_ms}")
        if self.cca_turnaround_ms < 0:
            raise InvalidScenario("cca_turnaround_ms must be non-negative")
        if self.policy is Policy.CSMA_CA and self.cca_turnaround_ms >= self.airtime_ms:
            raise InvalidScenario("CSMA needs cca_turnaround_ms < airtime_ms")


class Outcome(enum.Enum):
    DELIVERED = "delivered"
    COLLIDED = "collided"
    DEFERRED = "deferred"
    DROPPED = "dropped"


@dataclass(frozen=True)
class TxAttempt:
    meter: int
    start_s: float
    end_s: float
    attempt_no: int = 1
    outcome: Outcome | None = None


@dataclass(frozen=True)
class SimMetrics:
    g_offered: float
    g_measured: float
    s_throughput: float
    pdr: float
    collisions: int
    retransmissions: int
    drops: int
    mean_delivery_delay_s: float
    attempts: int
    delivered: int
    generated: int
    deferred: int
    s_stderr: float


@dataclass(frozen=True)
class ThroughputPoint:
    g: float
    s_simulated: float
    s_analytic: float | None
    policy: Policy
    s_stderr: float
    metrics: SimMetrics


def analytic_pure_aloha(g: float) -> float:
    """Throughput of pure Aloha at offered load g: a frame survives only if
    no other start falls inside twice its airtime."""
    if g < 0:
        raise ValueError("offered load must be non-negative")
    return g * math.exp(-2.0 * g)


def analytic_slotted_aloha(g: float) -> float:
    if g < 0:
        raise ValueError("offered load must be non-negative")
    return g * math.exp(-g)


def analytic_np_csma(g: float, a: float) -> float:
    """Nonpersistent CSMA throughput with normalized turnaround a = tau/m."""
    if g < 0 or a < 0:
        raise ValueError("offered load and turnaround must be non-negative")
    e = math.exp(-a * g)
    return g * e / (g * (1.0 + 2.0 * a) + e)


def analytic_throughput(policy: Policy, g: float, a: float = 0.1) -> float:
    if policy is Policy.PURE_ALOHA:
        return analytic_pure_aloha(g)
    if policy is Policy.SLOTTED_ALOHA:
        return analytic_slotted_aloha(g)
    return analytic_np_csma(g, a)


def detect_outcomes(attempts: list[TxAttempt]) -> list[Outcome]:
    """Classify attempts by pure interval overlap, in input order.

    Half-open [start, end) intervals; touching frames do not collide; any
    intersection marks every involved attempt as collided.
    """
    n = len(attempts)
    collided = [False] * n
    order = sorted(range(n), key=lambda i: (attempts[i].start_s, attempts[i].meter, i))
    active: list[tuple[float, int]] = []
    for i in order:
        s, e = attempts[i].start_s, attempts[i].end_s
        active = [(e2, j) for (e2, j) in active if e2 > s]
        if active:
            collided[i] = True
            for _, j in active:
                collided[j] = True
        active.append((e, i))
    return [Outcome.COLLIDED if c else Outcome.DELIVERED for c in collided]


class _Packet:
    __slots__ = ("meter", "gen_t", "ready_t", "access", "attempt", "start", "end",
                 "collided", "relay", "frame")

    def __init__(self, meter: int, gen_t: int, access: int, relay: bool = False,
                 frame: bytes | None = None):
        self.meter = meter
        self.gen_t = gen_t
        self.ready_t = gen_t
        self.access = access
        self.attempt = 1
        self.start = 0
        self.end = 0
        self.collided = False
        self.relay = relay
        self.frame = frame


class _Meter:
    __slots__ = ("idx", "cfg", "state", "rng", "ack_on", "active", "pending", "busy_until")

    def __init__(self, idx, cfg, state, rng, ack_on):
        self.idx = idx
        self.cfg = cfg
        self.state = state
        self.rng = rng
        self.ack_on = ack_on
        self.active: _Packet | None = None
        self.pending: deque[_Packet] = deque()
        self.busy_until = 0


_GEN, _START, _END, _SENSE, _TIMEOUT, _ACK = range(6)

_N_BATCHES = 20

# The engine runs on an integer microsecond clock: interval arithmetic
# (slot boundaries, half-open frame adjacency, CCA windows) stays exact,
# and event ordering is unambiguous. One microsecond on a 10 ms frame is
# four orders of magnitude below the statistical tolerances in use.
_US = 1_000_000


def run_sim(scenario, seed=None, deliver=None, event_log=None) -> SimMetrics:
    """Simulate one scenario and return channel metrics.

    deliver, when given, is called as deliver(meter_index, frame_bytes, t_s)
    for every telegram that reaches the hub intact, in delivery order and
    over the whole run. event_log accepts a path or a writable text file and
    receives one CSV row per channel event. Metrics exclude the first 5% of
    simulated time (startup transient).
    """
    duration = float(scenario.duration_s)
    if duration <= 0:
        raise InvalidScenario(f"duration_s must be positive, got {scenario.duration_s}")
    if not scenario.meters or sum(c.count for c in scenario.meters) == 0:
        raise InvalidScenario("scenario has no meters")
    if seed is None:
        seed = scenario.seed

    ch: ChannelParams = scenario.channel
    air = round(ch.airtime_ms * 1000)
    slot = round(ch.slot_ms * 1000)
    tau = round(ch.cca_turnaround_ms * 1000) if ch.policy is Policy.CSMA_CA else 0
    timeout_us = round(ch.ack.timeout_ms * 1000)
    backoff_us = ch.ack.backoff_window_ms * 1000.0
    ack_air = round(ch.ack.ack_airtime_ms * 1000)
    if air < 1 or slot < 1:
        raise InvalidScenario("airtime_ms and slot_ms must be at least 0.001 ms")
    policy = ch.policy
    abandon = ch.csma_defer is DeferMode.ABANDON
    max_retries = ch.ack.max_retries

    addresses = expand_addresses(scenario.meters)
    meters: list[_Meter] = []
    for cfg in scenario.meters:
        for _ in range(cfg.count):
            idx = len(meters)
            ack_on = ch.ack.enabled and cfg.mode.bidirectional
            meters.append(_Meter(idx, cfg, MeterState(addresses[idx]), meter_rng(seed, idx), ack_on))
    repeaters = [m for m in meters if m.cfg.kind is MeterKind.REPEATER]
    need_frames = deliver is not None

    duration_us = round(duration * _US)
    warmup = duration_us // 20
    meas = duration_us - warmup
    batch_len = meas / _N_BATCHES
    batch_air = [0] * _N_BATCHES

    log_file = None
    log_write = None
    if event_log is not None:
        if hasattr(event_log, "write"):
            log_write = event_log.write
        else:
            log_file = open(event_log, "w", encoding="utf-8")
            log_write = log_file.write
        log_write("time_s,meter,attempt_no,event\n")

    heap: list[tuple[int, int, int, int, _Packet | None]] = []
    seq = 0

    def push(t, midx, kind, pkt):
        nonlocal seq
        seq += 1
        heapq.heappush(heap, (t, midx, seq, kind, pkt))

    # on-air entries: [start, end, packet]; packet None marks hub acks,
    # which occupy the channel but can never be corrupted themselves.
    on_air: deque[list] = deque()

    generated = resolved = delivered_pkts = 0
    attempts = delivered_att = collisions = drops = retx = deferred = 0
    attempt_air_sum = success_air_sum = delay_sum = 0

    def log(t, midx, attempt, event):
        log_write(f"{t / _US:.6f},{midx},{attempt},{event}\n")

    def mark_collided(pkt: _Packet, t: int):
        if not pkt.collided:
            pkt.collided = True
            if log_write:
                log(t, pkt.meter, pkt.attempt, "collision")

    def begin_tx(m: _Meter, pkt: _Packet, t: int):
        pkt.start = t
        pkt.end = t + air
        while on_air and on_air[0][1] + tau <= t:
            on_air.popleft()
        for entry in on_air:
            if entry[1] > t:
                other = entry[2]
                if other is not None:
                    mark_collided(other, t)
                mark_collided(pkt, t)
        on_air.append([t, pkt.end, pkt])
        m.busy_until = pkt.end
        if log_write:
            log(t, pkt.meter, pkt.attempt, "tx_start")
        push(pkt.end, m.idx, _END, pkt)

    def start_packet(m: _Meter, pkt: _Packet, ready_t: int):
        t0 = max(ready_t, m.busy_until)
        if policy is Policy.PURE_ALOHA:
            push(t0, m.idx, _START, pkt)
        elif policy is Policy.SLOTTED_ALOHA:
            push(-(-t0 // slot) * slot, m.idx, _START, pkt)
        else:
            push(t0, m.idx, _SENSE, pkt)

    def resolve(m: _Meter, t: int, pkt: _Packet, was_delivered: bool):
        nonlocal resolved, delivered_pkts, delay_sum
        if not pkt.relay and pkt.gen_t >= warmup:
            resolved += 1
            if was_delivered:
                delivered_pkts += 1
                delay_sum += t - pkt.gen_t
        m.active = None
        if m.pending:
            nxt = m.pending.popleft()
            m.active = nxt
            start_packet(m, nxt, max(t, nxt.ready_t))

    def make_frame(m: _Meter, pkt: _Packet) -> bytes:
        if pkt.frame is None:
            telegram = Telegram(Control.DATA_UNSOLICITED, m.state.address, pkt.access,
                                tuple(m.cfg.records))
            pkt.frame = encode_telegram(telegram)
        return pkt.frame

    def next_gen_delay(m: _Meter, t: int) -> int:
        now_s = t / _US
        delta = next_transmission_time(m.cfg, now_s, m.rng) - now_s
        return max(1, round(delta * _US))

    for m in meters:
        t0 = next_gen_delay(m, 0)
        m.state.next_tx_s = t0 / _US
        push(t0, m.idx, _GEN, None)

    while heap:
        t, midx, _, kind, pkt = heapq.heappop(heap)
        if t > duration_us:
            break
        m = meters[midx]

        if kind == _GEN:
            acc = m.state.access_number
            m.state.access_number = (acc + 1) & 0xFF
            if t >= warmup:
                generated += 1
            nxt_t = t + next_gen_delay(m, t)
            m.state.next_tx_s = nxt_t / _US
            push(nxt_t, midx, _GEN, None)
            new = _Packet(midx, t, acc)
            if m.active is None:
                m.active = new
                start_packet(m, new, t)
            else:
                m.pending.append(new)

        elif kind == _START:
            begin_tx(m, pkt, t)

        elif kind == _SENSE:
            while on_air and on_air[0][1] + tau <= t:
                on_air.popleft()
            busy = any(s + tau <= t < e + tau for s, e, _ in on_air)
            if not busy:
                begin_tx(m, pkt, t)
            else:
                if t >= warmup:
                    deferred += 1
                if abandon:
                    resolve(m, t, pkt, False)
                else:
                    push(t + round(m.rng.uniform(0.0, backoff_us)), midx, _SENSE, pkt)

        elif kind == _END:
            counted = pkt.start >= warmup
            if log_write:
                log(t, midx, pkt.attempt, "tx_end")
            if counted:
                attempts += 1
                attempt_air_sum += air
                if pkt.attempt >= 2:
                    retx += 1
            if not pkt.collided:
                if counted:
                    delivered_att += 1
                    success_air_sum += air
                    b = int((pkt.start - warmup) / batch_len)
                    batch_air[b if b < _N_BATCHES else _N_BATCHES - 1] += air
                if need_frames:
                    deliver(midx, make_frame(m, pkt), t / _US)
                if not pkt.relay:
                    for rep in repeaters:
                        if rep.idx == midx:
                            continue
                        copy = _Packet(rep.idx, t, pkt.access, relay=True,
                                       frame=pkt.frame)
                        copy.ready_t = t + round(rep.rng.uniform(2.0 * air, 4.0 * air))
                        if rep.active is None:
                            rep.active = copy
                            start_packet(rep, copy, copy.ready_t)
                        else:
                            rep.pending.append(copy)
                if m.ack_on:
                    if ack_air > 0:
                        while on_air and on_air[0][1] + tau <= t:
                            on_air.popleft()
                        for entry in on_air:
                            if entry[1] > t and entry[2] is not None:
                                mark_collided(entry[2], t)
                        on_air.append([t, t + ack_air, None])
                        push(t + ack_air, midx, _ACK, pkt)
                    else:
                        if log_write:
                            log(t, midx, pkt.attempt, "ack")
                        resolve(m, t, pkt, True)
                else:
                    resolve(m, t, pkt, True)
            else:
                if m.ack_on:
                    if counted:
                        if pkt.attempt > max_retries:
                            drops += 1
                        else:
                            collisions += 1
                    push(t + timeout_us, midx, _TIMEOUT, pkt)
                else:
                    if counted:
                        collisions += 1
                    resolve(m, t, pkt, False)

        elif kind == _TIMEOUT:
            if log_write:
                log(t, midx, pkt.attempt, "timeout")
            if pkt.attempt <= max_retries:
                pkt.attempt += 1
                pkt.collided = False
                m.state.retries_left = max_retries - (pkt.attempt - 1)
                start_packet(m, pkt, t + round(m.rng.uniform(0.0, backoff_us)))
            else:
                if log_write:
                    log(t, midx, pkt.attempt, "drop")
                resolve(m, t, pkt, False)

        elif kind == _ACK:
            if log_write:
                log(t, midx, pkt.attempt, "ack")
            resolve(m, t, pkt, True)

    if log_file is not None:
        log_file.close()

    batch_s = [b / batch_len for b in batch_air]
    stderr = statistics.stdev(batch_s) / math.sqrt(_N_BATCHES) if len(batch_s) > 1 else 0.0
    return SimMetrics(
        g_offered=offered_load(scenario),
        g_measured=attempt_air_sum / meas,
        s_throughput=success_air_sum / meas,
        pdr=(delivered_pkts / resolved) if resolved else 1.0,
        collisions=collisions,
        retransmissions=retx,
        drops=drops,
        mean_delivery_delay_s=(delay_sum / delivered_pkts / _US) if delivered_pkts else 0.0,
        attempts=attempts,
        delivered=delivered_att,
        generated=generated,
        deferred=deferred,
        s_stderr=stderr,
    )


def _poisson_scenario(policy: Policy, g: float, frames: int, airtime_ms: float,
                      a: float, n_meters: int):
    from .scenario import MucOptions, Scenario  # deferred: scenario.py imports us

    airtime_s = airtime_ms / 1000.0
    interval_s = n_meters * airtime_s / g
    duration = frames * airtime_s / g / 0.95  # so the post-warmup window sees ~frames
    channel = ChannelParams(
        airtime_ms=airtime_ms,
        cca_turnaround_ms=a * airtime_ms,
        policy=policy,
        csma_defer=DeferMode.ABANDON,
    )
    cfg = MeterConfig(
        kind=MeterKind.ELECTRICITY,
        count=n_meters,
        interval_min=interval_s / 60.0,
        arrival=Arrival.POISSON,
    )
    return Scenario(duration_s=duration, seed=0, channel=channel, meters=[cfg],
                    muc=MucOptions())


def throughput_point(policy: Policy, g: float, seed, frames_per_point: int = 200_000,
                     *, airtime_ms: float = 10.0, a: float = 0.1,
                     n_meters: int = 2048) -> ThroughputPoint:
    """Measure simulated throughput for Poisson traffic at one offered load."""
    if g <= 0:
        raise InvalidScenario(f"offered load must be positive, got {g}")
    scn = _poisson_scenario(policy, g, frames_per_point, airtime_ms, a, n_meters)
    metrics = run_sim(scn, seed=seed)
    return ThroughputPoint(
        g=g,
        s_simulated=metrics.s_throughput,
        s_analytic=analytic_throughput(policy, g, a),
        policy=policy,
        s_stderr=metrics.s_stderr,
        metrics=metrics,
    )


def sweep(policy: Policy, g_min: float, g_max: float, steps: int, seed,
          frames_per_point: int = 200_000, *, airtime_ms: float = 10.0,
          a: float = 0.1, n_meters: int = 2048) -> list[ThroughputPoint]:
    """Offered-load sweep: one Poisson scenario per grid point, paired with
    the matching closed-form value."""
    if not 0 < g_min < g_max:
        raise InvalidScenario(f"need 0 < g_min < g_max, got {g_min}..{g_max}")
    if steps < 2:
        raise InvalidScenario(f"steps must be at least 2, got {steps}")
    points = []
    for k in range(steps):
        g = g_min + (g_max - g_min) * k / (steps - 1)
        points.append(
            throughput_point(policy, g, seed=f"{seed}#{k}",
                             frames_per_point=frames_per_point,
                             airtime_ms=airtime_ms, a=a, n_meters=n_meters)
        )
    return points
