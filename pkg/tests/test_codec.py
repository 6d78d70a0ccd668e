import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from metersim.codec import (
    BadBcd,
    BadCrc,
    BadLength,
    CodecError,
    Coding,
    Control,
    DataRecord,
    DeviceType,
    InvalidManufacturer,
    InvalidManufacturerCode,
    InvalidTelegram,
    MeterAddress,
    Quantity,
    Telegram,
    TooManyRecords,
    Unit,
    UnknownCi,
    UnknownCoding,
    UnknownControl,
    UnknownVif,
    ValueOverflow,
    crc16,
    decode_telegram,
    encode_telegram,
    pack_manufacturer,
    unpack_manufacturer,
    vif_decode,
)

# Hand-encoded: ack from ("ABC", 12345678, v1, electricity), access number 0.
ACK_FRAME = bytes.fromhex("0B004304785634120102720019CD")


def crc16_bitwise(data: bytes) -> int:
    """Independent oracle: plain MSB-first bit loop, no tables."""
    crc = 0x0000
    for byte in data:
        crc ^= byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ 0x3D65) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
    return crc ^ 0xFFFF


def repack_crc(frame: bytes) -> bytes:
    """Recompute the trailing CRC after tampering with frame bytes."""
    return frame[:-2] + crc16(frame[:-2]).to_bytes(2, "big")


manufacturer_st = st.text(
    alphabet=st.characters(min_codepoint=ord("A"), max_codepoint=ord("Z")),
    min_size=3, max_size=3,
)


@st.composite
def record_st(draw):
    quantity = draw(st.sampled_from(list(Quantity)))
    if quantity is Quantity.TEMPERATURE:
        scale = -1
    elif quantity is Quantity.VOLUME:
        scale = draw(st.integers(-6, 1))
    else:
        scale = draw(st.integers(-3, 4))
    coding = draw(st.sampled_from(list(Coding)))
    if coding is Coding.BCD8:
        value = draw(st.integers(0, 99_999_999))
    else:
        bits = {Coding.INT8: 8, Coding.INT16: 16, Coding.INT32: 32, Coding.INT48: 48}[coding]
        value = draw(st.integers(-(2 ** (bits - 1)), 2 ** (bits - 1) - 1))
    return DataRecord(coding, quantity, scale, value)


@st.composite
def telegram_st(draw):
    control = draw(st.sampled_from(list(Control)))
    address = MeterAddress(
        draw(manufacturer_st),
        draw(st.integers(0, 99_999_999)),
        draw(st.integers(0, 255)),
        draw(st.integers(0, 255)),
    )
    if control is Control.ACK:
        records = []
    else:
        min_size = 1 if control is Control.DATA_UNSOLICITED else 0
        records = draw(st.lists(record_st(), min_size=min_size, max_size=10))
    return Telegram(control, address, draw(st.integers(0, 255)), tuple(records))


def test_pack_manufacturer_examples():
    assert pack_manufacturer("ABC") == 0x0443 == 1091
    assert pack_manufacturer("AAA") == 0x0421 == 1057


@pytest.mark.parametrize("bad", ["AB", "ABCD", "AbC", "A1C", "ab", ""])
def test_pack_manufacturer_rejects(bad):
    with pytest.raises(InvalidManufacturer):
        pack_manufacturer(bad)


def test_unpack_manufacturer_examples():
    assert unpack_manufacturer(0x0443) == "ABC"
    assert unpack_manufacturer(0x0421) == "AAA"
    with pytest.raises(InvalidManufacturerCode):
        unpack_manufacturer(0x0000)
    with pytest.raises(InvalidManufacturerCode):
        unpack_manufacturer(0x0443 | 0x8000)
    with pytest.raises(InvalidManufacturerCode):
        unpack_manufacturer((27 << 10) | (1 << 5) | 1)  # first group 27 > 26


def test_pack_unpack_bijection_exhaustive():
    seen = set()
    for a in range(26):
        for b in range(26):
            for c in range(26):
                code = chr(65 + a) + chr(65 + b) + chr(65 + c)
                packed = pack_manufacturer(code)
                assert unpack_manufacturer(packed) == code
                seen.add(packed)
    assert len(seen) == 26**3 == 17_576


def test_crc_check_value():
    assert crc16(b"123456789") == 0xC2B7 == crc16_bitwise(b"123456789")


def test_crc_empty_input():
    assert crc16(b"") == 0xFFFF


@given(st.binary(max_size=64))
def test_crc_matches_bitwise_oracle(data):
    assert crc16(data) == crc16_bitwise(data)


def test_encode_ack_frame_fixture():
    ack = Telegram(Control.ACK, MeterAddress("ABC", 12345678, 1, DeviceType.ELECTRICITY), 0)
    frame = encode_telegram(ack)
    assert frame == ACK_FRAME
    assert len(frame) == 14  # 12-byte header plus CRC
    assert frame[0] == 11  # L counts everything after itself except the CRC
    assert decode_telegram(frame) == ack


def test_roundtrip_two_record_gas_telegram():
    telegram = Telegram(
        Control.DATA_UNSOLICITED,
        MeterAddress("GAS", 87654321, 2, DeviceType.GAS),
        5,
        (
            DataRecord(Coding.BCD8, Quantity.VOLUME, -3, 12345678),
            DataRecord(Coding.INT16, Quantity.TEMPERATURE, -1, -55),
        ),
    )
    frame = encode_telegram(telegram)
    assert frame[0] == len(frame) - 3
    assert decode_telegram(frame) == telegram


@settings(max_examples=300)
@given(telegram_st())
def test_roundtrip_property(telegram):
    assert decode_telegram(encode_telegram(telegram)) == telegram


def test_too_many_records():
    records = tuple(DataRecord(Coding.INT8, Quantity.ENERGY, 0, 1) for _ in range(11))
    with pytest.raises(TooManyRecords):
        Telegram(Control.DATA_UNSOLICITED,
                 MeterAddress("ABC", 1, 1, DeviceType.ELECTRICITY), 0, records)


@pytest.mark.parametrize("coding,value", [
    (Coding.INT8, 128),
    (Coding.INT8, -129),
    (Coding.INT16, 40_000),
    (Coding.INT32, 2**31),
    (Coding.INT48, 2**47),
    (Coding.BCD8, -1),
    (Coding.BCD8, 100_000_000),
])
def test_value_overflow(coding, value):
    with pytest.raises(ValueOverflow):
        DataRecord(coding, Quantity.ENERGY, 0, value)


def test_telegram_shape_invariants():
    addr = MeterAddress("ABC", 1, 1, DeviceType.ELECTRICITY)
    rec = DataRecord(Coding.INT8, Quantity.ENERGY, 0, 1)
    with pytest.raises(InvalidTelegram):
        Telegram(Control.ACK, addr, 0, (rec,))
    with pytest.raises(InvalidTelegram):
        Telegram(Control.DATA_UNSOLICITED, addr, 0, ())
    with pytest.raises(InvalidTelegram):
        Telegram(Control.COMMAND, addr, 999, ())


def test_unencodable_scale_raises_unknown_vif():
    rec = DataRecord(Coding.INT8, Quantity.ENERGY, 7, 1)  # no VIF at 10^7 Wh
    with pytest.raises(UnknownVif):
        encode_telegram(Telegram(Control.DATA_UNSOLICITED,
                                 MeterAddress("ABC", 1, 1, 2), 0, (rec,)))


def test_decode_truncated_frame():
    with pytest.raises(BadLength):
        decode_telegram(ACK_FRAME[:10])
    with pytest.raises(BadLength):
        decode_telegram(b"")


def test_decode_l_field_mismatch():
    frame = bytearray(ACK_FRAME)
    frame[0] = 12
    with pytest.raises(BadLength):
        decode_telegram(bytes(frame))


def test_decode_bad_crc():
    frame = bytearray(ACK_FRAME)
    frame[5] ^= 0x01
    with pytest.raises(BadCrc):
        decode_telegram(bytes(frame))


def _patched(offset: int, value: int) -> bytes:
    frame = bytearray(ACK_FRAME)
    frame[offset] = value
    return repack_crc(bytes(frame))


def test_decode_unknown_control():
    with pytest.raises(UnknownControl):
        decode_telegram(_patched(1, 0x99))


def test_decode_unknown_ci():
    with pytest.raises(UnknownCi):
        decode_telegram(_patched(10, 0x7A))


def test_decode_invalid_manufacturer_code():
    frame = bytearray(ACK_FRAME)
    frame[2] = 0x00
    frame[3] = 0x00
    with pytest.raises(InvalidManufacturerCode):
        decode_telegram(repack_crc(bytes(frame)))


def test_decode_bad_ident_bcd():
    with pytest.raises(BadBcd):
        decode_telegram(_patched(4, 0xAB))


def _data_frame(record_bytes: bytes) -> bytes:
    head = bytes([0x44]) + ACK_FRAME[2:12]
    body = head + record_bytes
    frame = bytes([len(body)]) + body
    return frame + crc16(frame).to_bytes(2, "big")


def test_decode_unknown_coding():
    with pytest.raises(UnknownCoding):
        decode_telegram(_data_frame(bytes([0x03, 0x00, 0x01, 0x01, 0x01])))
    with pytest.raises(UnknownCoding):
        decode_telegram(_data_frame(bytes([0x81, 0x00, 0x01])))  # high nibble set


def test_decode_unknown_vif():
    with pytest.raises(UnknownVif):
        decode_telegram(_data_frame(bytes([0x01, 0xFF, 0x01])))


def test_decode_truncated_record():
    with pytest.raises(BadLength):
        decode_telegram(_data_frame(bytes([0x04, 0x03, 0x01, 0x02])))  # int32 cut short


def test_decode_total_over_arbitrary_bytes():
    rng_frames = [bytes(range(20)), b"\xff" * 40, ACK_FRAME + b"\x00"]
    for frame in rng_frames:
        with pytest.raises(CodecError):
            decode_telegram(frame)


@settings(max_examples=60)
@given(telegram_st(), st.data())
def test_single_bit_flip_never_silently_decodes(telegram, data):
    frame = encode_telegram(telegram)
    bit = data.draw(st.integers(0, len(frame) * 8 - 1))
    corrupted = bytearray(frame)
    corrupted[bit // 8] ^= 1 << (bit % 8)
    with pytest.raises(CodecError):
        decode_telegram(bytes(corrupted))


def test_vif_decode_examples():
    assert vif_decode(0x03) == (Quantity.ENERGY, Unit.WH, 0)
    assert vif_decode(0x13) == (Quantity.VOLUME, Unit.M3, -3)
    assert vif_decode(0x5A) == (Quantity.TEMPERATURE, Unit.CELSIUS, -1)
    with pytest.raises(UnknownVif):
        vif_decode(0xFF)


def test_vif_table_roundtrip():
    from metersim.codec import vif_encode

    for vif in list(range(0x00, 0x08)) + list(range(0x10, 0x18)) + list(range(0x28, 0x30)) + [0x5A]:
        quantity, _, scale = vif_decode(vif)
        assert vif_encode(quantity, scale) == vif
