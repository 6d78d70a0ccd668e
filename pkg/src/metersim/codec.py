"""Simplified wireless M-Bus telegram codec.

The frame is EN-13757-flavored but deliberately simpler than the radio
standard: a single CRC-16 over the whole frame instead of per-block CRCs,
no encryption, no extended DIF/VIF chains. Byte layout:

    [0]      L field: number of bytes after L, excluding the trailing CRC
    [1]      C field: 0x44 unsolicited data, 0x00 ack, 0x53 command
    [2:4]    manufacturer code, little-endian (three-letter packing)
    [4:8]    meter ident, 8 decimal digits, packed BCD, little-endian
    [8]      version byte
    [9]      device type byte
    [10]     CI field, fixed 0x72
    [11]     access number
    [12:-2]  data records: DIF byte, VIF byte, value bytes
    [-2:]    CRC-16 (poly 0x3D65, init 0x0000, final xor 0xFFFF), big-endian

Decoding is total over arbitrary byte strings: every failure mode raises a
typed CodecError subclass, never an unhandled exception. All types are
immutable values; everything here is safe to call concurrently.
"""

import enum
from dataclasses import dataclass, field


class CodecError(ValueError):
    """Base class for every telegram encode/decode failure."""


class InvalidManufacturer(CodecError):
    pass


class InvalidManufacturerCode(CodecError):
    pass


class TooManyRecords(CodecError):
    pass


class ValueOverflow(CodecError):
    pass


class UnknownVif(CodecError):
    pass


class UnknownCoding(CodecError):
    pass


class UnknownControl(CodecError):
    pass


class UnknownCi(CodecError):
    pass


class BadLength(CodecError):
    pass


class BadCrc(CodecError):
    pass


class BadBcd(CodecError):
    pass


class InvalidTelegram(CodecError):
    pass


CI_FIELD = 0x72
MAX_RECORDS = 10
MIN_FRAME_LEN = 14  # 12-byte header plus 2 CRC bytes


class Control(enum.IntEnum):
    DATA_UNSOLICITED = 0x44
    ACK = 0x00
    COMMAND = 0x53


class DeviceType(enum.IntEnum):
    ELECTRICITY = 0x02
    GAS = 0x03
    HEAT = 0x04
    HOT_WATER = 0x06
    REPEATER = 0x32


_MEDIUM_NAMES = {
    DeviceType.ELECTRICITY: "electricity",
    DeviceType.GAS: "gas",
    DeviceType.HEAT: "heat",
    DeviceType.HOT_WATER: "hot-water",
    DeviceType.REPEATER: "repeater",
}


def medium_name(device_type: int) -> str:
    """Human-readable medium for a device type byte; hex for unknown codes."""
    try:
        return _MEDIUM_NAMES[DeviceType(device_type)]
    except ValueError:
        return f"0x{device_type:02x}"


class Coding(enum.IntEnum):
    """DIF data-field nibble."""

    INT8 = 0x01
    INT16 = 0x02
    INT32 = 0x04
    INT48 = 0x06
    BCD8 = 0x0C


_CODING_WIDTH = {
    Coding.INT8: 1,
    Coding.INT16: 2,
    Coding.INT32: 4,
    Coding.INT48: 6,
    Coding.BCD8: 4,
}


class Quantity(enum.Enum):
    ENERGY = "energy"
    VOLUME = "volume"
    POWER = "power"
    TEMPERATURE = "temperature"


class Unit(enum.Enum):
    WH = "Wh"
    M3 = "m3"
    W = "W"
    CELSIUS = "Celsius"


QUANTITY_UNIT = {
    Quantity.ENERGY: Unit.WH,
    Quantity.VOLUME: Unit.M3,
    Quantity.POWER: Unit.W,
    Quantity.TEMPERATURE: Unit.CELSIUS,
}

# VIF ranges: (base byte, quantity, scale_exp of the base byte). Each range
# spans 8 codes, scale_exp increasing with the low three bits. Temperature
# is a single fixed code at 0.1 C resolution.
_VIF_RANGES = (
    (0x00, Quantity.ENERGY, -3),
    (0x10, Quantity.VOLUME, -6),
    (0x28, Quantity.POWER, -3),
)
_VIF_TEMPERATURE = 0x5A


def vif_encode(quantity: Quantity, scale_exp: int) -> int:
    if quantity is Quantity.TEMPERATURE:
        if scale_exp != -1:
            raise UnknownVif(f"temperature records are fixed at scale -1, got {scale_exp}")
        return _VIF_TEMPERATURE
    for base, q, scale0 in _VIF_RANGES:
        if q is quantity:
            n = scale_exp - scale0
            if 0 <= n <= 7:
                return base + n
            raise UnknownVif(f"no VIF for {quantity.value} at scale 10^{scale_exp}")
    raise UnknownVif(f"no VIF range for {quantity}")


def vif_decode(vif: int) -> tuple[Quantity, Unit, int]:
    """Look a VIF byte up: (quantity, unit, decimal scale exponent)."""
    if vif == _VIF_TEMPERATURE:
        return Quantity.TEMPERATURE, Unit.CELSIUS, -1
    for base, q, scale0 in _VIF_RANGES:
        if base <= vif <= base + 7:
            return q, QUANTITY_UNIT[q], scale0 + (vif - base)
    raise UnknownVif(f"VIF 0x{vif:02x} not in table")


# CRC-16 with polynomial 0x3D65, MSB first, init 0x0000, final xor 0xFFFF.
def _build_crc_table() -> list[int]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x3D65) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return table


_CRC_TABLE = _build_crc_table()


def crc16(data: bytes) -> int:
    crc = 0x0000
    table = _CRC_TABLE
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ table[(crc >> 8) ^ b]
    return crc ^ 0xFFFF


def pack_manufacturer(code: str) -> int:
    """Pack three uppercase letters into the 15-bit manufacturer code."""
    if len(code) != 3 or not all("A" <= c <= "Z" for c in code):
        raise InvalidManufacturer(f"manufacturer must be 3 letters A-Z, got {code!r}")
    c1, c2, c3 = (ord(c) - 64 for c in code)
    return c1 * 1024 + c2 * 32 + c3


def unpack_manufacturer(m: int) -> str:
    if not 0 <= m <= 0xFFFF:
        raise InvalidManufacturerCode(f"manufacturer code out of 16-bit range: {m}")
    groups = ((m >> 10) & 0x1F, (m >> 5) & 0x1F, m & 0x1F)
    if any(g == 0 or g > 26 for g in groups) or m >> 15:
        raise InvalidManufacturerCode(f"0x{m:04x} has a letter group outside 1..26")
    return "".join(chr(g + 64) for g in groups)


def _bcd_encode(value: int, n_bytes: int) -> bytes:
    digits = 2 * n_bytes
    if value < 0 or value >= 10**digits:
        raise ValueOverflow(f"{value} not representable as {digits}-digit BCD")
    out = bytearray(n_bytes)
    for i in range(n_bytes):
        out[i] = (value % 10) | ((value // 10 % 10) << 4)
        value //= 100
    return bytes(out)


def _bcd_decode(data: bytes) -> int:
    value = 0
    for b in reversed(data):
        hi, lo = b >> 4, b & 0x0F
        if hi > 9 or lo > 9:
            raise BadBcd(f"nibble out of range in BCD byte 0x{b:02x}")
        value = value * 100 + hi * 10 + lo
    return value


@dataclass(frozen=True)
class MeterAddress:
    manufacturer: str
    ident: int
    version: int
    device_type: int

    def __post_init__(self):
        pack_manufacturer(self.manufacturer)  # validates letters
        if not 0 <= self.ident <= 99_999_999:
            raise InvalidTelegram(f"ident {self.ident} outside 8 decimal digits")
        if not 0 <= self.version <= 255 or not 0 <= self.device_type <= 255:
            raise InvalidTelegram("version and device_type must be bytes")
        try:
            object.__setattr__(self, "device_type", DeviceType(self.device_type))
        except ValueError:
            pass  # non-table codes stay plain ints ("Other")

    def __str__(self) -> str:
        return f"{self.manufacturer}-{self.ident:08d}"


def _int_range(coding: Coding) -> tuple[int, int]:
    bits = 8 * _CODING_WIDTH[coding]
    return -(1 << (bits - 1)), (1 << (bits - 1)) - 1


@dataclass(frozen=True)
class DataRecord:
    coding: Coding
    quantity: Quantity
    scale_exp: int
    value: int

    def __post_init__(self):
        if self.coding is Coding.BCD8:
            if not 0 <= self.value <= 99_999_999:
                raise ValueOverflow(f"BCD8 needs 0..99999999, got {self.value}")
        else:
            lo, hi = _int_range(self.coding)
            if not lo <= self.value <= hi:
                raise ValueOverflow(f"{self.value} does not fit {self.coding.name}")

    @property
    def unit(self) -> Unit:
        return QUANTITY_UNIT[self.quantity]


@dataclass(frozen=True)
class Telegram:
    control: Control
    address: MeterAddress
    access_number: int
    records: tuple[DataRecord, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        if not 0 <= self.access_number <= 255:
            raise InvalidTelegram(f"access number {self.access_number} not a byte")
        if len(self.records) > MAX_RECORDS:
            raise TooManyRecords(f"{len(self.records)} records, limit {MAX_RECORDS}")
        if self.control is Control.ACK and self.records:
            raise InvalidTelegram("ack telegrams carry no records")
        if self.control is Control.DATA_UNSOLICITED and not self.records:
            raise InvalidTelegram("unsolicited data telegrams carry at least one record")


def _encode_record(rec: DataRecord) -> bytes:
    vif = vif_encode(rec.quantity, rec.scale_exp)
    if rec.coding is Coding.BCD8:
        value_bytes = _bcd_encode(rec.value, 4)
    else:
        value_bytes = rec.value.to_bytes(_CODING_WIDTH[rec.coding], "little", signed=True)
    return bytes([rec.coding.value, vif]) + value_bytes


def encode_telegram(telegram: Telegram) -> bytes:
    """Serialize a telegram to wire bytes (L, header, records, CRC)."""
    addr = telegram.address
    body = bytearray([telegram.control.value])
    body += pack_manufacturer(addr.manufacturer).to_bytes(2, "little")
    body += _bcd_encode(addr.ident, 4)
    body += bytes([addr.version, int(addr.device_type), CI_FIELD, telegram.access_number])
    for rec in telegram.records:
        body += _encode_record(rec)
    frame = bytes([len(body)]) + bytes(body)
    return frame + crc16(frame).to_bytes(2, "big")


def _decode_records(data: bytes) -> tuple[DataRecord, ...]:
    records = []
    pos = 0
    while pos < len(data):
        if len(records) == MAX_RECORDS:
            raise TooManyRecords(f"more than {MAX_RECORDS} records in frame")
        dif = data[pos]
        if dif & 0xF0:
            raise UnknownCoding(f"DIF 0x{dif:02x} has a nonzero high nibble")
        try:
            coding = Coding(dif & 0x0F)
        except ValueError:
            raise UnknownCoding(f"DIF nibble 0x{dif & 0x0F:x} not a known coding") from None
        if pos + 2 + _CODING_WIDTH[coding] > len(data):
            raise BadLength("record truncated")
        quantity, _, scale_exp = vif_decode(data[pos + 1])
        raw = data[pos + 2 : pos + 2 + _CODING_WIDTH[coding]]
        if coding is Coding.BCD8:
            value = _bcd_decode(raw)
        else:
            value = int.from_bytes(raw, "little", signed=True)
        records.append(DataRecord(coding, quantity, scale_exp, value))
        pos += 2 + _CODING_WIDTH[coding]
    return tuple(records)


def decode_telegram(frame: bytes) -> Telegram:
    """Parse wire bytes back into a telegram.

    Accepts arbitrary byte strings and raises a CodecError subclass on any
    structural, CRC, or field-range problem.
    """
    frame = bytes(frame)
    if len(frame) < MIN_FRAME_LEN:
        raise BadLength(f"frame of {len(frame)} bytes, minimum is {MIN_FRAME_LEN}")
    if frame[0] != len(frame) - 3:
        raise BadLength(f"L field {frame[0]} does not match {len(frame) - 3} payload bytes")
    if crc16(frame[:-2]) != int.from_bytes(frame[-2:], "big"):
        raise BadCrc("CRC mismatch")
    try:
        control = Control(frame[1])
    except ValueError:
        raise UnknownControl(f"C field 0x{frame[1]:02x}") from None
    manufacturer = unpack_manufacturer(int.from_bytes(frame[2:4], "little"))
    ident = _bcd_decode(frame[4:8])
    if frame[10] != CI_FIELD:
        raise UnknownCi(f"CI field 0x{frame[10]:02x}, expected 0x{CI_FIELD:02x}")
    address = MeterAddress(manufacturer, ident, frame[8], frame[9])
    records = _decode_records(frame[12:-2])
    return Telegram(control, address, frame[11], records)
