"""Scenario files: a whole simulation setup as one JSON document.

Example, a four-meter population behind one concentrator:

    {
      "duration_s": 86400,
      "seed": 7,
      "channel": {"airtime_ms": 10.0, "policy": "pure-aloha"},
      "meters": [
        {"kind": "electricity"},
        {"kind": "gas"},
        {"kind": "district-heating"},
        {"kind": "hot-water"}
      ],
      "muc": {"dedup": true}
    }

Unknown keys and structural problems raise ParseError with the offending
key path; domain violations are collected and raised together as one
ValidationError.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

from .channel import AckParams, ChannelParams, DeferMode, Policy
from .codec import Coding, DataRecord, Quantity
from .traffic import Arrival, MeterConfig, MeterKind, WmbusMode


class ParseError(ValueError):
    pass


class ValidationError(ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


@dataclass
class MucOptions:
    dedup: bool = True
    raw: bool = False
    muc_id: str = "MUC-1"


@dataclass
class Scenario:
    duration_s: float
    seed: int
    channel: ChannelParams = field(default_factory=ChannelParams)
    meters: list[MeterConfig] = field(default_factory=list)
    muc: MucOptions = field(default_factory=MucOptions)


def _require_keys(obj: dict, allowed: set[str], where: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ParseError(f"unknown key '{key}' in {where}")


def _number(obj, key, where, errors, default=None, required=False):
    if key not in obj:
        if required:
            errors.append(f"{where}: missing required key '{key}'")
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{where}.{key} must be a number")
    return float(v)


def _enum(obj, key, enum_cls, where, errors, default):
    if key not in obj:
        return default
    v = obj[key]
    try:
        return enum_cls(v)
    except ValueError:
        names = ", ".join(e.value for e in enum_cls)
        errors.append(f"{where}.{key}: '{v}' is not one of {names}")
        return default


def _parse_coding(name, where: str, errors: list[str]) -> Coding | None:
    try:
        return Coding[str(name).upper()]
    except KeyError:
        options = ", ".join(c.name.lower() for c in Coding)
        errors.append(f"{where}.coding: '{name}' is not one of {options}")
        return None


def _parse_record(obj, where: str, errors: list[str]) -> DataRecord | None:
    if not isinstance(obj, dict):
        raise ParseError(f"{where} must be an object")
    _require_keys(obj, {"coding", "quantity", "scale_exp", "value"}, where)
    coding = _parse_coding(obj.get("coding", "int32"), where, errors)
    quantity = _enum(obj, "quantity", Quantity, where, errors, None)
    if "quantity" not in obj:
        errors.append(f"{where}: missing required key 'quantity'")
    scale = obj.get("scale_exp", 0)
    value = obj.get("value", 0)
    if isinstance(scale, bool) or not isinstance(scale, int):
        raise ParseError(f"{where}.scale_exp must be an integer")
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"{where}.value must be an integer")
    if coding is None or quantity is None:
        return None
    try:
        return DataRecord(coding, quantity, scale, value)
    except ValueError as err:
        errors.append(f"{where}: {err}")
        return None


def _parse_meter(obj, where: str, errors: list[str]) -> MeterConfig | None:
    if not isinstance(obj, dict):
        raise ParseError(f"{where} must be an object")
    _require_keys(obj, {"kind", "count", "interval_min", "arrival", "jitter",
                        "mode", "records"}, where)
    if "kind" not in obj:
        errors.append(f"{where}: missing required key 'kind'")
        return None
    kind = _enum(obj, "kind", MeterKind, where, errors, None)
    if kind is None:
        return None
    count = obj.get("count", 1)
    if isinstance(count, bool) or not isinstance(count, int):
        raise ParseError(f"{where}.count must be an integer")
    interval = _number(obj, "interval_min", where, errors, default=None)
    arrival = _enum(obj, "arrival", Arrival, where, errors, Arrival.PERIODIC_JITTER)
    jitter = _number(obj, "jitter", where, errors, default=0.1)
    mode = _enum(obj, "mode", WmbusMode, where, errors, WmbusMode.T1)
    records = []
    raw_records = obj.get("records", [])
    if not isinstance(raw_records, list):
        raise ParseError(f"{where}.records must be an array")
    for i, rec in enumerate(raw_records):
        parsed = _parse_record(rec, f"{where}.records[{i}]", errors)
        if parsed is not None:
            records.append(parsed)
    try:
        return MeterConfig(kind=kind, count=count, interval_min=interval,
                           arrival=arrival, jitter=jitter, mode=mode,
                           records=records)
    except ValueError as err:
        errors.append(f"{where}: {err}")
        return None


def _parse_ack(obj, where: str, errors: list[str]) -> AckParams:
    _require_keys(obj, {"enabled", "timeout_ms", "max_retries",
                        "backoff_window_ms", "ack_airtime_ms"}, where)
    enabled = obj.get("enabled", False)
    if not isinstance(enabled, bool):
        raise ParseError(f"{where}.enabled must be a boolean")
    retries = obj.get("max_retries", 3)
    if isinstance(retries, bool) or not isinstance(retries, int):
        raise ParseError(f"{where}.max_retries must be an integer")
    try:
        return AckParams(
            enabled=enabled,
            timeout_ms=_number(obj, "timeout_ms", where, errors, default=50.0),
            max_retries=retries,
            backoff_window_ms=_number(obj, "backoff_window_ms", where, errors, default=100.0),
            ack_airtime_ms=_number(obj, "ack_airtime_ms", where, errors, default=0.0),
        )
    except ValueError as err:
        errors.append(f"{where}: {err}")
        return AckParams()


def _parse_channel(obj, where: str, errors: list[str]) -> ChannelParams:
    _require_keys(obj, {"airtime_ms", "slot_ms", "cca_turnaround_ms", "policy",
                        "ack", "csma_defer"}, where)
    ack = obj.get("ack", {})
    if not isinstance(ack, dict):
        raise ParseError(f"{where}.ack must be an object")
    try:
        return ChannelParams(
            airtime_ms=_number(obj, "airtime_ms", where, errors, default=10.0),
            slot_ms=_number(obj, "slot_ms", where, errors, default=None),
            cca_turnaround_ms=_number(obj, "cca_turnaround_ms", where, errors, default=1.0),
            policy=_enum(obj, "policy", Policy, where, errors, Policy.PURE_ALOHA),
            ack=_parse_ack(ack, f"{where}.ack", errors),
            csma_defer=_enum(obj, "csma_defer", DeferMode, where, errors, DeferMode.RESENSE),
        )
    except ValueError as err:
        errors.append(f"{where}: {err}")
        return ChannelParams()


def _parse_muc(obj, where: str, errors: list[str]) -> MucOptions:
    _require_keys(obj, {"dedup", "raw", "id"}, where)
    dedup = obj.get("dedup", True)
    raw = obj.get("raw", False)
    muc_id = obj.get("id", "MUC-1")
    if not isinstance(dedup, bool) or not isinstance(raw, bool):
        raise ParseError(f"{where}.dedup and {where}.raw must be booleans")
    if not isinstance(muc_id, str):
        raise ParseError(f"{where}.id must be a string")
    return MucOptions(dedup=dedup, raw=raw, muc_id=muc_id)


def parse_scenario_text(text: str) -> Scenario:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"not valid JSON: line {err.lineno}, column {err.colno}: "
                         f"{err.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError("scenario document must be a JSON object")
    _require_keys(doc, {"duration_s", "seed", "channel", "meters", "muc"}, "scenario")

    errors: list[str] = []
    duration = _number(doc, "duration_s", "scenario", errors, required=True)
    seed = doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ParseError("scenario.seed must be an integer")
    if seed < 0:
        errors.append("scenario: seed must be non-negative")

    channel_obj = doc.get("channel", {})
    if not isinstance(channel_obj, dict):
        raise ParseError("scenario.channel must be an object")
    channel = _parse_channel(channel_obj, "channel", errors)

    meters_obj = doc.get("meters", [])
    if not isinstance(meters_obj, list):
        raise ParseError("scenario.meters must be an array")
    meters = []
    for i, mobj in enumerate(meters_obj):
        cfg = _parse_meter(mobj, f"meters[{i}]", errors)
        if cfg is not None:
            meters.append(cfg)

    muc_obj = doc.get("muc", {})
    if not isinstance(muc_obj, dict):
        raise ParseError("scenario.muc must be an object")
    muc = _parse_muc(muc_obj, "muc", errors)

    if duration is not None and duration <= 0:
        errors.append(f"scenario: duration_s must be positive, got {duration}")
    if errors:
        raise ValidationError(errors)
    return Scenario(duration_s=duration, seed=seed, channel=channel,
                    meters=meters, muc=muc)


def parse_scenario(path) -> Scenario:
    """Load and fully validate a scenario file."""
    return parse_scenario_text(Path(path).read_text(encoding="utf-8"))
