"""Command-line front end.

Subcommands:

    simulate  run a scenario file through the channel and concentrator
    sweep     offered-load sweep for one access policy, CSV out
    analytic  closed-form throughput curves, CSV out
    encode    telegram JSON -> frame hex
    decode    frame hex -> telegram JSON

All randomness flows from the single seed; identical invocations produce
byte-identical output. Exit code 1 flags input or scenario errors, 2 flags
usage errors.
"""

import argparse
import json
import sys

from .channel import (
    InvalidScenario,
    Policy,
    analytic_throughput,
    sweep,
)
from .codec import (
    CodecError,
    Coding,
    Control,
    DataRecord,
    DeviceType,
    MeterAddress,
    Quantity,
    Telegram,
    decode_telegram,
    encode_telegram,
    medium_name,
)
from .muc import TcpEmitter, max_visualisation_outage, simulate_scenario
from .scenario import ParseError, ValidationError, parse_scenario
from .traffic import Arrival

SWEEP_HEADER = "policy,g_offered,g_measured,s_sim,s_analytic,pdr,collisions,retx,drops,seed"
SIM_HEADER = SWEEP_HEADER + ",accepted,duplicates,rejected,readings,skipped,outage_max"

_CONTROL_NAMES = {
    Control.DATA_UNSOLICITED: "data-unsolicited",
    Control.ACK: "ack",
    Control.COMMAND: "command",
}
_CONTROL_BY_NAME = {v: k for k, v in _CONTROL_NAMES.items()}
_DEVICE_BY_NAME = {medium_name(dt): dt for dt in DeviceType}


def _parse_g(text: str):
    """'min:max:steps' -> (min, max, steps); a bare float -> (g, g, 1)."""
    parts = text.split(":")
    try:
        if len(parts) == 1:
            g = float(parts[0])
            return g, g, 1
        if len(parts) == 3:
            return float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        pass
    raise argparse.ArgumentTypeError(f"expected FLOAT or MIN:MAX:STEPS, got {text!r}")


def _open_out(path: str):
    if path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _grid(g_min: float, g_max: float, steps: int) -> list[float]:
    if steps == 1:
        return [g_min]
    return [g_min + (g_max - g_min) * k / (steps - 1) for k in range(steps)]


def telegram_to_json(telegram: Telegram) -> str:
    dt = telegram.address.device_type
    device = medium_name(dt) if isinstance(dt, DeviceType) else int(dt)
    doc = {
        "control": _CONTROL_NAMES[telegram.control],
        "address": {
            "mfr": telegram.address.manufacturer,
            "id": telegram.address.ident,
            "version": telegram.address.version,
            "device_type": device,
        },
        "access_number": telegram.access_number,
        "records": [
            {
                "coding": rec.coding.name.lower(),
                "quantity": rec.quantity.value,
                "scale_exp": rec.scale_exp,
                "value": rec.value,
            }
            for rec in telegram.records
        ],
    }
    return json.dumps(doc, separators=(",", ":"))


def telegram_from_json(text: str) -> Telegram:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"telegram is not valid JSON: {err.msg}") from None
    try:
        control = _CONTROL_BY_NAME[doc["control"]]
        addr = doc["address"]
        device = addr["device_type"]
        if isinstance(device, str):
            device = _DEVICE_BY_NAME[device]
        address = MeterAddress(addr["mfr"], addr["id"], addr.get("version", 1), device)
        records = tuple(
            DataRecord(
                Coding[rec["coding"].upper()],
                Quantity(rec["quantity"]),
                rec.get("scale_exp", 0),
                rec["value"],
            )
            for rec in doc.get("records", [])
        )
        return Telegram(control, address, doc.get("access_number", 0), records)
    except (KeyError, TypeError) as err:
        raise ParseError(f"bad telegram object: {err}") from None


def _sweep_row(point, seed) -> str:
    m = point.metrics
    analytic = f"{point.s_analytic:.6f}" if point.s_analytic is not None else ""
    return (
        f"{point.policy.value},{point.g:.6f},{m.g_measured:.6f},"
        f"{m.s_throughput:.6f},{analytic},{m.pdr:.6f},"
        f"{m.collisions},{m.retransmissions},{m.drops},{seed}"
    )


def cmd_sweep(args) -> int:
    points = sweep(Policy(args.policy), *_check_range(args.g), seed=args.seed,
                   frames_per_point=args.frames, airtime_ms=args.airtime_ms, a=args.a)
    out, close = _open_out(args.out)
    try:
        out.write(SWEEP_HEADER + "\n")
        for point in points:
            out.write(_sweep_row(point, args.seed) + "\n")
    finally:
        if close:
            out.close()
    return 0


def _check_range(g) -> tuple[float, float, int]:
    g_min, g_max, steps = g
    if steps < 2:
        raise InvalidScenario("sweep needs --g MIN:MAX:STEPS with at least 2 steps")
    return g_min, g_max, steps


def cmd_analytic(args) -> int:
    g_min, g_max, steps = args.g
    policy = Policy(args.policy)
    out, close = _open_out(args.out)
    try:
        out.write("policy,g,s_analytic\n")
        for g in _grid(g_min, g_max, steps):
            s = analytic_throughput(policy, g, args.a)
            out.write(f"{policy.value},{g:.6f},{s:.6f}\n")
    finally:
        if close:
            out.close()
    return 0


def cmd_simulate(args) -> int:
    scenario = parse_scenario(args.scenario)
    seed = args.seed if args.seed is not None else scenario.seed
    emitter = None
    extra = []
    if args.emit_tcp:
        host, _, port = args.emit_tcp.rpartition(":")
        emitter = TcpEmitter(host, int(port))
        extra.append(emitter)
    try:
        metrics, muc, _sink = simulate_scenario(scenario, seed=seed,
                                                extra_sinks=extra,
                                                event_log=args.event_log)
    finally:
        if emitter is not None:
            emitter.close()

    policy = scenario.channel.policy
    if all(cfg.arrival is Arrival.POISSON for cfg in scenario.meters):
        a = scenario.channel.cca_turnaround_ms / scenario.channel.airtime_ms
        analytic = f"{analytic_throughput(policy, metrics.g_offered, a):.6f}"
    else:
        analytic = ""
    outage = max_visualisation_outage(scenario, muc)
    outage_text = f"{outage:.6f}" if outage is not None else ""
    row = (
        f"{policy.value},{metrics.g_offered:.6f},{metrics.g_measured:.6f},"
        f"{metrics.s_throughput:.6f},{analytic},{metrics.pdr:.6f},"
        f"{metrics.collisions},{metrics.retransmissions},{metrics.drops},{seed},"
        f"{muc.accepted},{muc.duplicates},{muc.rejected},{muc.readings_emitted},"
        f"{muc.records_skipped},{outage_text}"
    )
    out, close = _open_out(args.out)
    try:
        out.write(SIM_HEADER + "\n")
        out.write(row + "\n")
    finally:
        if close:
            out.close()
    return 0


def cmd_encode(args) -> int:
    text = sys.stdin.read() if args.telegram == "-" else args.telegram
    frame = encode_telegram(telegram_from_json(text))
    print(frame.hex().upper())
    return 0


def cmd_decode(args) -> int:
    try:
        frame = bytes.fromhex(args.hex.strip())
    except ValueError:
        raise ParseError(f"not a hex string: {args.hex!r}") from None
    print(telegram_to_json(decode_telegram(frame)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metersim",
        description="Smart-metering channel simulator and telegram tools",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    policies = [p.value for p in Policy]

    p_sim = sub.add_parser("simulate", help="run a scenario file")
    p_sim.add_argument("--scenario", required=True)
    p_sim.add_argument("--seed", type=int, default=None,
                       help="override the scenario's seed")
    p_sim.add_argument("--out", default="-")
    p_sim.add_argument("--emit-tcp", metavar="HOST:PORT", default=None,
                       help="push concentrator output lines to a TCP sink")
    p_sim.add_argument("--event-log", default=None,
                       help="write the channel event log CSV to this path")
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", help="offered-load throughput sweep")
    p_sweep.add_argument("--policy", required=True, choices=policies)
    p_sweep.add_argument("--g", required=True, type=_parse_g, metavar="MIN:MAX:STEPS")
    p_sweep.add_argument("--seed", type=int, default=1)
    p_sweep.add_argument("--frames", type=int, default=200_000,
                         help="minimum generated frames per sweep point")
    p_sweep.add_argument("--a", type=float, default=0.1,
                         help="CSMA turnaround as a fraction of airtime")
    p_sweep.add_argument("--airtime-ms", type=float, default=10.0)
    p_sweep.add_argument("--out", default="-")
    p_sweep.set_defaults(func=cmd_sweep)

    p_an = sub.add_parser("analytic", help="closed-form throughput curves")
    p_an.add_argument("--policy", required=True, choices=policies)
    p_an.add_argument("--g", required=True, type=_parse_g, metavar="G|MIN:MAX:STEPS")
    p_an.add_argument("--a", type=float, default=0.1)
    p_an.add_argument("--out", default="-")
    p_an.set_defaults(func=cmd_analytic)

    p_enc = sub.add_parser("encode", help="telegram JSON to frame hex")
    p_enc.add_argument("telegram", help="telegram JSON, or - for stdin")
    p_enc.set_defaults(func=cmd_encode)

    p_dec = sub.add_parser("decode", help="frame hex to telegram JSON")
    p_dec.add_argument("hex")
    p_dec.set_defaults(func=cmd_decode)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CodecError, ParseError, ValidationError, InvalidScenario) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
