import pytest
from hypothesis import given
from hypothesis import strategies as st

from metersim.codec import DeviceType, Quantity
from metersim.obis import (
    MalformedObis,
    ObisCode,
    UnmappedPair,
    format_obis,
    map_to_obis,
    parse_obis,
)

MAPPING = {
    (DeviceType.ELECTRICITY, Quantity.ENERGY): "1-0:1.8.0",
    (DeviceType.ELECTRICITY, Quantity.POWER): "1-0:1.7.0",
    (DeviceType.GAS, Quantity.VOLUME): "7-0:3.0.0",
    (DeviceType.HEAT, Quantity.ENERGY): "6-0:1.0.0",
    (DeviceType.HOT_WATER, Quantity.VOLUME): "9-0:1.0.0",
}


@pytest.mark.parametrize("pair,expected", sorted(MAPPING.items(), key=str))
def test_mapping_table(pair, expected):
    device, quantity = pair
    assert format_obis(map_to_obis(device, quantity)) == expected


@pytest.mark.parametrize("device", list(DeviceType) + [0x47])
def test_temperature_maps_for_every_medium(device):
    assert format_obis(map_to_obis(device, Quantity.TEMPERATURE)) == "0-0:96.9.0"


@pytest.mark.parametrize("pair", [
    (DeviceType.GAS, Quantity.POWER),
    (DeviceType.GAS, Quantity.ENERGY),
    (DeviceType.REPEATER, Quantity.ENERGY),
    (DeviceType.HOT_WATER, Quantity.POWER),
    (0x47, Quantity.VOLUME),
])
def test_unmapped_pairs(pair):
    with pytest.raises(UnmappedPair):
        map_to_obis(*pair)


def test_format_example():
    assert format_obis(ObisCode(1, 0, 1, 8, 0)) == "1-0:1.8.0"
    assert str(ObisCode(0, 0, 96, 9, 0)) == "0-0:96.9.0"


def test_parse_example():
    assert parse_obis("1-0:1.8.0") == ObisCode(1, 0, 1, 8, 0)
    assert parse_obis("255-255:255.255.255") == ObisCode(255, 255, 255, 255, 255)


@pytest.mark.parametrize("bad", [
    "1-0:1.8",
    "1-0-1.8.0",
    "1:0-1.8.0",
    "256-0:1.8.0",
    "1-0:1.8.0.0",
    "a-b:c.d.e",
    "",
    " 1-0:1.8.0",
])
def test_parse_rejects_malformed(bad):
    with pytest.raises(MalformedObis):
        parse_obis(bad)


@given(st.tuples(*(st.integers(0, 255) for _ in range(5))))
def test_format_parse_roundtrip(groups):
    code = ObisCode(*groups)
    assert parse_obis(format_obis(code)) == code


def test_group_range_enforced():
    with pytest.raises(MalformedObis):
        ObisCode(256, 0, 0, 0, 0)
    with pytest.raises(MalformedObis):
        ObisCode(0, 0, 0, -1, 0)
