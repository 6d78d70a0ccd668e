"""OBIS identification of decoded meter readings.

The concentrator attaches an OBIS code to every data record before pushing
it upstream. The mapping table below follows the usual medium convention
(A group: 1 electricity, 6 heat, 7 gas, 9 hot water) with cumulative-total
tariff/channel groups; temperature maps to a generic status code for every
medium.
"""

import re
from dataclasses import dataclass

from .codec import (
    DeviceType,
    MeterAddress,
    Quantity,
    Unit,
    UnknownVif,
    vif_decode,
)

__all__ = [
    "ObisCode",
    "ObisReading",
    "ObisError",
    "MalformedObis",
    "UnmappedPair",
    "map_to_obis",
    "format_obis",
    "parse_obis",
    "vif_decode",
    "UnknownVif",
]


class ObisError(ValueError):
    pass


class MalformedObis(ObisError):
    pass


class UnmappedPair(ObisError):
    pass


@dataclass(frozen=True)
class ObisCode:
    a: int
    b: int
    c: int
    d: int
    e: int

    def __post_init__(self):
        for group in (self.a, self.b, self.c, self.d, self.e):
            if not 0 <= group <= 255:
                raise MalformedObis(f"value group {group} outside 0..255")

    def __str__(self) -> str:
        return format_obis(self)


@dataclass(frozen=True)
class ObisReading:
    code: ObisCode
    value: int
    scale_exp: int
    unit: Unit
    meter: MeterAddress
    timestamp_s: float


_MEDIUM_MAP = {
    (DeviceType.ELECTRICITY, Quantity.ENERGY): ObisCode(1, 0, 1, 8, 0),
    (DeviceType.ELECTRICITY, Quantity.POWER): ObisCode(1, 0, 1, 7, 0),
    (DeviceType.GAS, Quantity.VOLUME): ObisCode(7, 0, 3, 0, 0),
    (DeviceType.HEAT, Quantity.ENERGY): ObisCode(6, 0, 1, 0, 0),
    (DeviceType.HOT_WATER, Quantity.VOLUME): ObisCode(9, 0, 1, 0, 0),
}
_TEMPERATURE_CODE = ObisCode(0, 0, 96, 9, 0)


def map_to_obis(device_type: int, quantity: Quantity) -> ObisCode:
    """Deterministic (device type, quantity) -> OBIS lookup."""
    if quantity is Quantity.TEMPERATURE:
        return _TEMPERATURE_CODE
    try:
        return _MEDIUM_MAP[(device_type, quantity)]
    except KeyError:
        raise UnmappedPair(
            f"no OBIS code for device type {device_type!r} with {quantity.value}"
        ) from None


def format_obis(code: ObisCode) -> str:
    return f"{code.a}-{code.b}:{code.c}.{code.d}.{code.e}"


_OBIS_RE = re.compile(r"^(\d{1,3})-(\d{1,3}):(\d{1,3})\.(\d{1,3})\.(\d{1,3})$")


def parse_obis(text: str) -> ObisCode:
    m = _OBIS_RE.match(text)
    if not m:
        raise MalformedObis(f"not of the form A-B:C.D.E: {text!r}")
    groups = [int(g) for g in m.groups()]
    if any(g > 255 for g in groups):
        raise MalformedObis(f"value group above 255 in {text!r}")
    return ObisCode(*groups)
